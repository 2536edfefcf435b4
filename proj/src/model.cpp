#include "dscc/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dscc {
namespace {

void require(bool condition, const std::string& message) {
    if (!condition) {
        throw ValidationError(message);
    }
}

bool positive(double x) { return std::isfinite(x) && x > 0.0; }

void require_finite(std::initializer_list<double> values, const char* where) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw ValidationError(std::string(where) + ": non-finite input");
        }
    }
}

}  // namespace

void MicrogridParams::validate() const {
    require(!sources.empty(), "params.sources: at least one source is required (k >= 2)");
    for (std::size_t j = 0; j < sources.size(); ++j) {
        const auto& s = sources[j];
        const std::string at = "params.sources[" + std::to_string(j) + "]";
        require(positive(s.C), at + ".C must be > 0");
        require(positive(s.L), at + ".L must be > 0");
        require(positive(s.R), at + ".R must be > 0");
    }
    require(positive(load.C_b), "params.load.C_b must be > 0");
    // R_l = +inf models a disconnected resistive load.
    require(load.R_l > 0.0 && !std::isnan(load.R_l), "params.load.R_l must be > 0");
    require(positive(load.L_f), "params.load.L_f must be > 0");
    require(positive(load.C_l), "params.load.C_l must be > 0");
    require(positive(load.r_l), "params.load.r_l must be > 0");
    require(positive(v_b_star), "params.v_b_star must be > 0");
    require(std::isfinite(d_l_star) && d_l_star >= 0.0 && d_l_star <= 1.0,
            "params.d_l_star must lie in [0, 1]");
}

MicrogridParams MicrogridParams::table3() {
    MicrogridParams p;
    p.sources = {
        {0.09e-3, 0.49e-3, 18.78e-3, 0.159e-3, 3.552e-3, 48.0},
        {0.07e-3, 0.48e-3, 17.78e-3, 0.159e-3, 3.552e-3, 48.0},
    };
    p.load = {0.47e-3, 2.0, 0.16e-3, 0.47e-3, 0.175, 2e-3};
    p.v_b_star = 32.0;
    p.d_l_star = 0.5;
    return p;
}

SystemState::SystemState(std::size_t num_sources)
    : num_sources_(num_sources), x_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * num_sources + 3))) {}

SystemState::SystemState(std::size_t num_sources, Eigen::VectorXd values)
    : num_sources_(num_sources), x_(std::move(values)) {
    require(static_cast<std::size_t>(x_.size()) == 2 * num_sources + 3,
            "state: length must equal 2(k-1)+3");
}

double SystemState::line_current_sum() const {
    double sum = 0.0;
    for (std::size_t j = 0; j < num_sources_; ++j) {
        sum += i_t(j);
    }
    return sum;
}

Eigen::VectorXd SystemState::subsystem(std::size_t j) const {
    if (j < num_sources_) {
        return x_.segment(static_cast<Eigen::Index>(2 * j), 2);
    }
    require(j == num_sources_, "state: subsystem index out of range");
    return x_.segment(static_cast<Eigen::Index>(2 * num_sources_), 3);
}

std::vector<std::string> SystemState::names(std::size_t num_sources) {
    std::vector<std::string> out;
    out.reserve(2 * num_sources + 3);
    for (std::size_t j = 1; j <= num_sources; ++j) {
        out.push_back("v_" + std::to_string(j));
        out.push_back("i_t_" + std::to_string(j));
    }
    out.insert(out.end(), {"v_b", "i_f", "v_l"});
    return out;
}

void ControlInput::set_component(std::size_t j, double value) {
    if (j < i_s.size()) {
        i_s[j] = value;
    } else {
        d_l = value;
    }
}

bool ControlInput::all_finite() const {
    return std::isfinite(d_l) && std::all_of(i_s.begin(), i_s.end(), [](double v) { return std::isfinite(v); });
}

ClampedDuty clamp_duty(double d_l) {
    const double c = std::clamp(d_l, 0.0, 1.0);
    return {c, c != d_l};
}

std::array<double, 2> source_rhs(const MicrogridParams& params, std::size_t j, double v_j, double i_t_j,
                                 double v_b, double i_s_j) {
    require(j < params.num_sources(), "source_rhs: source index out of range");
    require_finite({v_j, i_t_j, v_b, i_s_j}, "source_rhs");
    const auto& s = params.sources[j];
    return {(-i_t_j + i_s_j) / s.C, (v_j - i_t_j * s.R - v_b) / s.L};
}

std::array<double, 3> load_rhs(const MicrogridParams& params, double v_b, double i_f, double v_l,
                               double i_t_sum, double d_l) {
    require_finite({v_b, i_f, v_l, i_t_sum, d_l}, "load_rhs");
    const auto& l = params.load;
    return {(i_t_sum - v_b / l.R_l - i_f * d_l) / l.C_b, (-v_l + v_b * d_l) / l.L_f, (i_f - v_l / l.r_l) / l.C_l};
}

void global_rhs_into(const MicrogridParams& params, const Eigen::VectorXd& x, const ControlInput& input,
                     Eigen::VectorXd& dx) {
    const std::size_t n = params.num_sources();
    const Eigen::Index vb = static_cast<Eigen::Index>(2 * n);
    const double v_b = x[vb];
    double i_t_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const auto& s = params.sources[j];
        const Eigen::Index iv = static_cast<Eigen::Index>(2 * j);
        const double v = x[iv];
        const double i = x[iv + 1];
        dx[iv] = (-i + input.i_s[j]) / s.C;
        dx[iv + 1] = (v - i * s.R - v_b) / s.L;
        i_t_sum += i;
    }
    const auto& l = params.load;
    const double i_f = x[vb + 1];
    const double v_l = x[vb + 2];
    dx[vb] = (i_t_sum - v_b / l.R_l - i_f * input.d_l) / l.C_b;
    dx[vb + 1] = (-v_l + v_b * input.d_l) / l.L_f;
    dx[vb + 2] = (i_f - v_l / l.r_l) / l.C_l;
}

Eigen::VectorXd global_rhs(const MicrogridParams& params, const SystemState& state, const ControlInput& input) {
    require(state.num_sources() == params.num_sources() && state.size() == params.state_dim(),
            "global_rhs: state dimension does not match params");
    require(input.i_s.size() == params.num_sources(), "global_rhs: input dimension does not match params");
    require(state.all_finite() && input.all_finite(), "global_rhs: non-finite input");
    Eigen::VectorXd dx(state.size());
    const double v_b = state.v_b();
    for (std::size_t j = 0; j < params.num_sources(); ++j) {
        const auto d = source_rhs(params, j, state.v(j), state.i_t(j), v_b, input.i_s[j]);
        dx[static_cast<Eigen::Index>(SystemState::v_index(j))] = d[0];
        dx[static_cast<Eigen::Index>(SystemState::i_t_index(j))] = d[1];
    }
    const auto d = load_rhs(params, v_b, state.i_f(), state.v_l(), state.line_current_sum(), input.d_l);
    dx.tail(3) = Eigen::Vector3d(d[0], d[1], d[2]);
    return dx;
}

double PhSubsystem::hamiltonian(const Eigen::VectorXd& x) const { return 0.5 * x.dot(Q.cwiseProduct(x)); }

Eigen::VectorXd PhSubsystem::input_map(const Eigen::VectorXd& x) const {
    if (kind == SubsystemKind::Source) {
        return Eigen::Vector2d(1.0 / Q[0], 0.0);
    }
    return Eigen::Vector3d(-x[1] * inv_C_b, x[0] * inv_L_f, 0.0);
}

Eigen::VectorXd PhSubsystem::dynamics(const Eigen::VectorXd& x, double u, const Eigen::VectorXd& z) const {
    return drift(x) + input_map(x) * u + g_z * z;
}

std::vector<PhSubsystem> build_ph_subsystems(const MicrogridParams& params) {
    params.validate();
    const std::size_t n = params.num_sources();
    std::vector<PhSubsystem> out;
    out.reserve(n + 1);
    for (std::size_t j = 0; j < n; ++j) {
        const auto& s = params.sources[j];
        PhSubsystem sub;
        sub.index = j;
        sub.kind = SubsystemKind::Source;
        const double w = 1.0 / (s.L * s.C);
        sub.J = Eigen::Matrix2d{{0.0, -w}, {w, 0.0}};
        sub.R = Eigen::Matrix2d{{0.0, 0.0}, {0.0, s.R / (s.L * s.L)}};
        sub.Q = Eigen::Vector2d(s.C, s.L);
        sub.g_z = Eigen::MatrixXd::Zero(2, 1);
        sub.g_z(1, 0) = 1.0 / s.L;
        out.push_back(std::move(sub));
    }
    const auto& l = params.load;
    PhSubsystem load;
    load.index = n;
    load.kind = SubsystemKind::Load;
    const double w = 1.0 / (l.L_f * l.C_l);
    load.J = Eigen::Matrix3d{{0.0, 0.0, 0.0}, {0.0, 0.0, -w}, {0.0, w, 0.0}};
    load.R = Eigen::Matrix3d::Zero();
    load.R(0, 0) = 1.0 / (l.R_l * l.C_b * l.C_b);
    load.R(2, 2) = 1.0 / (l.r_l * l.C_l * l.C_l);
    load.Q = Eigen::Vector3d(l.C_b, l.L_f, l.C_l);
    load.g_z = Eigen::MatrixXd::Zero(3, static_cast<Eigen::Index>(n));
    load.g_z.row(0).setConstant(1.0 / l.C_b);
    load.inv_C_b = 1.0 / l.C_b;
    load.inv_L_f = 1.0 / l.L_f;
    out.push_back(std::move(load));
    return out;
}

Eigen::VectorXd coupling_input(const PhSubsystem& sub, const SystemState& state) {
    if (sub.kind == SubsystemKind::Source) {
        return Eigen::VectorXd::Constant(1, -state.v_b());
    }
    Eigen::VectorXd z(static_cast<Eigen::Index>(state.num_sources()));
    for (std::size_t j = 0; j < state.num_sources(); ++j) {
        z[static_cast<Eigen::Index>(j)] = state.i_t(j);
    }
    return z;
}

GiphReport validate_giph(const std::vector<PhSubsystem>& subsystems, const SystemState& state) {
    GiphReport report;
    auto fail = [&report](std::string what) {
        if (report.ok) {
            report.ok = false;
            report.failure = std::move(what);
        }
    };
    for (const auto& sub : subsystems) {
        const std::string name = "subsystem " + std::to_string(sub.index + 1);
        for (Eigen::Index r = 0; r < sub.J.rows(); ++r) {
            for (Eigen::Index c = 0; c < sub.J.cols(); ++c) {
                if (sub.J(r, c) != -sub.J(c, r)) {
                    fail(name + ": J not skew-symmetric at (" + std::to_string(r) + "," + std::to_string(c) +
                         "), J+J^T = " + std::to_string(sub.J(r, c) + sub.J(c, r)));
                }
                if (sub.R(r, c) != sub.R(c, r)) {
                    fail(name + ": R not symmetric at (" + std::to_string(r) + "," + std::to_string(c) + ")");
                }
            }
        }
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sub.R, Eigen::EigenvaluesOnly);
        const double min_eig = eig.eigenvalues().minCoeff();
        const double scale = std::max(sub.R.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
        if (min_eig < -1e-12 * scale) {
            fail(name + ": R not positive semidefinite, min eigenvalue " + std::to_string(min_eig));
        }
    }
    for (const auto& sub : subsystems) {
        const Eigen::VectorXd y = sub.output(state.subsystem(sub.index));
        const double term = y.dot(coupling_input(sub, state));
        report.port_sum += term;
        report.port_scale += std::abs(term);
    }
    if (!(std::abs(report.port_sum) <= 1e-12 * (1.0 + report.port_scale))) {
        fail("port powers do not cancel: sum y^T z = " + std::to_string(report.port_sum));
    }
    return report;
}

}  // namespace dscc
