#include "dscc/safety.hpp"

#include <cmath>

#include <fmt/format.h>

namespace dscc {

SafeSetViolation::SafeSetViolation(std::size_t subsystem, double value, Interval limits)
    : std::runtime_error(fmt::format("subsystem {} left its safe set: {:.17g} not in ({:g}, {:g})", subsystem + 1,
                                     value, limits.min, limits.max)),
      subsystem_(subsystem),
      value_(value),
      limits_(limits) {}

ClfTerms clf_terms(const MicrogridParams& params, const ControllerConfig& cfg, const Equilibrium& eq, std::size_t j,
                   const Eigen::Ref<const Eigen::VectorXd>& x_j) {
    ClfTerms t;
    const double rate = cfg.clf_rate.at(j);
    if (j < params.num_sources()) {
        const auto& s = params.sources[j];
        const double v = x_j[0];
        const double i = x_j[1];
        const double vh = v - eq.v_star[j];
        const double ih = i - eq.i_t_star[j];
        t.H = 0.5 * (s.C * vh * vh + s.L * ih * ih);
        t.LfH = -vh * i + ih * (v - s.R * i);
        t.LgH = vh;
        t.port = -ih * eq.v_b_star;
        t.error_sq = vh * vh + ih * ih;
        t.u_star = eq.i_s_star[j];
    } else {
        const auto& l = params.load;
        const double vb = x_j[0];
        const double i_f = x_j[1];
        const double vl = x_j[2];
        const double vbh = vb - eq.v_b_star;
        const double ifh = i_f - eq.i_f_star;
        const double vlh = vl - eq.v_l_star;
        t.H = 0.5 * (l.C_b * vbh * vbh + l.L_f * ifh * ifh + l.C_l * vlh * vlh);
        // 1/R_l = 0 for an open-circuit bus.
        t.LfH = -vbh * vb / l.R_l - ifh * vl + vlh * (i_f - vl / l.r_l);
        t.LgH = -vbh * i_f + ifh * vb;
        t.port = vbh * eq.total_load_current;
        t.error_sq = vbh * vbh + ifh * ifh + vlh * vlh;
        t.u_star = eq.d_l_star;
    }
    t.margin = rate * t.error_sq;
    return t;
}

double reciprocal_barrier(double s, const Interval& limits) {
    return -1.0 / ((s - limits.min) * (s - limits.max));
}

double reciprocal_barrier_derivative(double s, const Interval& limits) {
    const double a = s - limits.min;
    const double b = s - limits.max;
    return (2.0 * s - limits.min - limits.max) / (a * a * b * b);
}

CbfTerms cbf_terms(const MicrogridParams& params, const ControllerConfig& cfg, std::size_t j,
                   const Eigen::Ref<const Eigen::VectorXd>& x_j) {
    const Interval& lim = cfg.limits(j);
    CbfTerms t;
    t.s = x_j[j < params.num_sources() ? 0 : 1];
    if (!std::isfinite(t.s) || !lim.strictly_contains(t.s)) {
        throw SafeSetViolation(j, t.s, lim);
    }
    if (!std::isfinite(lim.min) || !std::isfinite(lim.max)) {
        t.bounded = false;
        return t;
    }
    t.h = (t.s - lim.min) * (t.s - lim.max);
    t.B = -1.0 / t.h;
    t.dB = reciprocal_barrier_derivative(t.s, lim);
    if (j < params.num_sources()) {
        const double C = params.sources[j].C;
        t.LgB = t.dB / C;
        t.LfB = -t.dB * x_j[1] / C;
    } else {
        const double L_f = params.load.L_f;
        t.LgB = t.dB * x_j[0] / L_f;
        t.LfB = -t.dB * x_j[2] / L_f;
    }
    t.rhs = cfg.beta.at(j) / t.B;
    return t;
}

Eigen::VectorXd clf_weights(const MicrogridParams& params) {
    Eigen::VectorXd q(static_cast<Eigen::Index>(params.state_dim()));
    Eigen::Index i = 0;
    for (const auto& s : params.sources) {
        q[i++] = s.C;
        q[i++] = s.L;
    }
    q[i++] = params.load.C_b;
    q[i++] = params.load.L_f;
    q[i] = params.load.C_l;
    return q;
}

double global_clf(const MicrogridParams& params, const Equilibrium& eq, const SystemState& state) {
    const Eigen::VectorXd e = state.values() - eq.state().values();
    return 0.5 * e.dot(clf_weights(params).cwiseProduct(e));
}

double global_clf_rate(const MicrogridParams& params, const Equilibrium& eq, const SystemState& state,
                       const ControlInput& input) {
    const Eigen::VectorXd e = state.values() - eq.state().values();
    return clf_weights(params).cwiseProduct(e).dot(global_rhs(params, state, input));
}

}  // namespace dscc
