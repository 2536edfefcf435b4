#include "dscc/nominal.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dscc {
namespace {

void require(bool condition, const std::string& message) {
    if (!condition) {
        throw ValidationError(message);
    }
}

bool positive(double x) { return std::isfinite(x) && x > 0.0; }

}  // namespace

const char* to_string(ClfMode mode) { return mode == ClfMode::Relaxed ? "relaxed" : "exact"; }

ClfMode clf_mode_from_string(const std::string& name) {
    if (name == "relaxed") {
        return ClfMode::Relaxed;
    }
    if (name == "exact") {
        return ClfMode::Exact;
    }
    throw ValidationError("clf_mode must be \"relaxed\" or \"exact\", got \"" + name + "\"");
}

ControllerConfig ControllerConfig::defaults(const MicrogridParams& params) {
    const std::size_t k = params.k();
    ControllerConfig cfg;
    cfg.alpha.assign(k, 0.01);
    cfg.alpha.back() = 0.6;
    cfg.beta.assign(k, 0.1);
    cfg.m.assign(k, 10.0);
    cfg.clf_rate.assign(k, 0.005);
    cfg.clf_rate.back() = 0.05;
    for (std::size_t j = 0; j < k; ++j) {
        const Eigen::VectorXd r_star = closed_loop_dissipation(params, cfg.alpha, j);
        for (Eigen::Index i = 0; i < r_star.size(); ++i) {
            cfg.lambda.push_back(0.5 * r_star[i]);
        }
    }
    cfg.v_limits.assign(params.num_sources(), Interval{20.0, 36.0});
    cfg.i_f_limits = Interval{-10.0, 120.0};
    return cfg;
}

Eigen::VectorXd closed_loop_dissipation(const MicrogridParams& params, const std::vector<double>& alpha,
                                        std::size_t j) {
    if (j < params.num_sources()) {
        const auto& s = params.sources[j];
        return Eigen::Vector2d(alpha.at(j) / (s.C * s.C), s.R / (s.L * s.L));
    }
    const auto& l = params.load;
    return Eigen::Vector3d(1.0 / (l.R_l * l.C_b * l.C_b), alpha.at(j) / (l.L_f * l.L_f),
                           1.0 / (l.r_l * l.C_l * l.C_l));
}

double max_clf_rate(const MicrogridParams& params, const ControllerConfig& cfg, std::size_t j) {
    const Eigen::VectorXd r_star = closed_loop_dissipation(params, cfg.alpha, j);
    const std::size_t offset = 2 * j;  // sources occupy two lambda slots each
    double weighted_min = INFINITY;
    Eigen::VectorXd q;
    if (j < params.num_sources()) {
        q = Eigen::Vector2d(params.sources[j].C, params.sources[j].L);
    } else {
        q = Eigen::Vector3d(params.load.C_b, params.load.L_f, params.load.C_l);
    }
    for (Eigen::Index i = 0; i < r_star.size(); ++i) {
        const double r_hat = r_star[i] - cfg.lambda.at(offset + static_cast<std::size_t>(i));
        weighted_min = std::min(weighted_min, q[i] * r_hat * q[i]);
    }
    double authority_free;
    if (j < params.num_sources()) {
        // LgH_j = v^_j vanishes at v_j = v_j*; only the line resistance dissipates there.
        authority_free = params.sources[j].R;
    } else {
        // LgH_k = v_b* i_f - i_f* v_b vanishes on i^_f = (i_f*/v_b*) v^_b.
        const auto& l = params.load;
        const double ratio = params.d_l_star / l.r_l;  // i_f* / v_b*
        authority_free = std::min(1.0 / (l.R_l * (1.0 + ratio * ratio)), 1.0 / l.r_l);
    }
    return std::min(weighted_min, authority_free);
}

void ControllerConfig::validate(const MicrogridParams& params) const {
    const std::size_t k = params.k();
    auto check_per_subsystem = [&](const std::vector<double>& values, const char* name) {
        require(values.size() == k, std::string("tuning.") + name + ": expected " + std::to_string(k) + " entries");
        for (std::size_t j = 0; j < k; ++j) {
            require(positive(values[j]), std::string("tuning.") + name + "[" + std::to_string(j) + "] must be > 0");
        }
    };
    check_per_subsystem(alpha, "alpha");
    check_per_subsystem(beta, "beta");
    check_per_subsystem(m, "m");
    check_per_subsystem(clf_rate, "clf_rate");
    require(lambda.size() == params.state_dim(),
            "tuning.lambda: expected " + std::to_string(params.state_dim()) + " entries");
    for (std::size_t i = 0; i < lambda.size(); ++i) {
        require(std::isfinite(lambda[i]) && lambda[i] >= 0.0,
                "tuning.lambda[" + std::to_string(i) + "] must be >= 0");
    }
    require(v_limits.size() == params.num_sources(),
            "limits: expected " + std::to_string(params.num_sources()) + " voltage intervals");
    for (std::size_t j = 0; j < v_limits.size(); ++j) {
        require(v_limits[j].min < v_limits[j].max,
                "limits.v_min[" + std::to_string(j) + "] must be < limits.v_max[" + std::to_string(j) + "]");
    }
    require(i_f_limits.min < i_f_limits.max,
            "limits.i_f_min must be < limits.i_f_max");
    require(positive(sample_period), "tuning.sample_period must be > 0");
    require(positive(eps_v), "tuning.eps_v must be > 0");

    for (std::size_t j = 0; j < k; ++j) {
        const Eigen::VectorXd r_star = closed_loop_dissipation(params, alpha, j);
        for (Eigen::Index i = 0; i < r_star.size(); ++i) {
            const std::size_t slot = 2 * j + static_cast<std::size_t>(i);
            require(r_star[i] - lambda[slot] >= 0.0,
                    "tuning.lambda[" + std::to_string(slot) + "] exceeds R* (R* - Lambda must stay PSD)");
        }
        const double bound = max_clf_rate(params, *this, j);
        // relative slack: the default source rate sits exactly on its bound
        require(clf_rate[j] <= bound * (1.0 + 1e-12), "tuning.clf_rate[" + std::to_string(j) + "] = " + std::to_string(clf_rate[j]) +
                                          " exceeds the admissible margin " + std::to_string(bound));
    }
}

NominalControllerState NominalControllerState::capture(const Equilibrium& eq, const SystemState& state, double t0) {
    NominalControllerState s;
    for (std::size_t j = 0; j < eq.i_t_star.size(); ++j) {
        s.ff0_.push_back(state.i_t(j) - eq.i_t_star[j]);
        s.t0_.push_back(t0);
    }
    return s;
}

void NominalControllerState::recapture(std::size_t j, double i_t_j, const Equilibrium& eq, double t) {
    ff0_.at(j) = i_t_j - eq.i_t_star.at(j);
    t0_.at(j) = t;
}

double NominalControllerState::feedforward(const MicrogridParams& params, std::size_t j, double t) const {
    const auto& s = params.sources.at(j);
    return ff0_.at(j) * std::exp(-s.R * (t - t0_.at(j)) / s.L);
}

double nominal_source(const MicrogridParams& params, const ControllerConfig& cfg, const Equilibrium& eq,
                      const NominalControllerState& ctrl_state, std::size_t j, double v_j, double t) {
    if (!ctrl_state.initialized()) {
        throw ValidationError("nominal_source: controller state not initialized");
    }
    return eq.i_s_star.at(j) - cfg.alpha.at(j) * (v_j - eq.v_star.at(j)) + ctrl_state.feedforward(params, j, t);
}

double nominal_load(const ControllerConfig& cfg, const Equilibrium& eq, double i_f, double v_b) {
    if (v_b <= cfg.eps_v) {
        return eq.d_l_star;
    }
    return eq.d_l_star - cfg.alpha.back() * (i_f - eq.i_f_star) / v_b;
}

}  // namespace dscc
