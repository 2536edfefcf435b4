#pragma once

// Dynamic IDA-PBC nominal controller and the controller configuration shared
// by the safety filter.

#include "dscc/equilibrium.hpp"
#include "dscc/model.hpp"

#include <cstddef>
#include <vector>

namespace dscc {

struct Interval {
    double min = 0.0;
    double max = 0.0;

    double width() const { return max - min; }
    double midpoint() const { return 0.5 * (min + max); }
    bool contains(double s) const { return s >= min && s <= max; }
    bool strictly_contains(double s) const { return s > min && s < max; }

    bool operator==(const Interval&) const = default;
};

/// How the CLF row of the safety QP is relaxed.
enum class ClfMode {
    Relaxed,  ///< gamma-corrected slack with penalty m (the QP as stated)
    Exact,    ///< no slack: hard CLF row, yielding to the CBF row on conflict
};

const char* to_string(ClfMode mode);
ClfMode clf_mode_from_string(const std::string& name);

/// Per-subsystem vectors have k entries (sources first, load last);
/// `lambda` has one entry per state in SystemState order.
struct ControllerConfig {
    std::vector<double> alpha;     ///< nominal damping gain
    std::vector<double> beta;      ///< CBF decay rate
    std::vector<double> m;         ///< slack penalty
    std::vector<double> clf_rate;  ///< CLF margin rate on |x^_j|^2 [W per unit^2]
    std::vector<double> lambda;    ///< dissipation margin subtracted from R*
    std::vector<Interval> v_limits;  ///< an infinite bound switches the barrier off
    Interval i_f_limits;
    double sample_period = 50e-6;
    double eps_v = 0.5;  ///< bus voltage below which the load law holds d_l*
    ClfMode clf_mode = ClfMode::Relaxed;

    /// Safe interval of the protected scalar of subsystem j (v_j or i_f).
    const Interval& limits(std::size_t j) const { return j < v_limits.size() ? v_limits[j] : i_f_limits; }

    /// Reference tuning: m = 10, beta = 0.1,
    /// alpha = (0.01, ..., 0.6), Lambda = R*/2, limits v in [20, 36] V,
    /// i_f in [-10, 120] A.
    static ControllerConfig defaults(const MicrogridParams& params);

    /// Throws ValidationError on dimension, sign, or CLF-margin inconsistencies.
    void validate(const MicrogridParams& params) const;

    bool operator==(const ControllerConfig&) const = default;
};

/// Diagonal of the desired closed-loop dissipation R*_j.
Eigen::VectorXd closed_loop_dissipation(const MicrogridParams& params, const std::vector<double>& alpha,
                                        std::size_t j);

/// Largest CLF margin rate compatible with subsystem j's configuration:
/// min of lambda_min(Q (R* - Lambda) Q) and the open-loop dissipation left
/// on the set where the control has no authority over H_j.
double max_clf_rate(const MicrogridParams& params, const ControllerConfig& cfg, std::size_t j);

/// Internal state of the dynamic IDA-PBC: each source keeps the line-current
/// error captured at (re)start and decays it with time constant L_j / R_j.
class NominalControllerState {
public:
    NominalControllerState() = default;

    static NominalControllerState capture(const Equilibrium& eq, const SystemState& state, double t0);

    /// Re-captures source j's feedforward, e.g. when its controller resumes.
    void recapture(std::size_t j, double i_t_j, const Equilibrium& eq, double t);

    bool initialized() const { return !ff0_.empty(); }
    double initial_error(std::size_t j) const { return ff0_.at(j); }
    double start_time(std::size_t j) const { return t0_.at(j); }
    double feedforward(const MicrogridParams& params, std::size_t j, double t) const;

private:
    std::vector<double> ff0_;
    std::vector<double> t0_;
};

/// i_s_j = i_s_j* - alpha_j (v_j - v_j*) + ff_j(t).
double nominal_source(const MicrogridParams& params, const ControllerConfig& cfg, const Equilibrium& eq,
                      const NominalControllerState& ctrl_state, std::size_t j, double v_j, double t);

/// d_l = d_l* - alpha_k (i_f - i_f*) / v_b for v_b > eps_v, else d_l*. Not clamped.
double nominal_load(const ControllerConfig& cfg, const Equilibrium& eq, double i_f, double v_b);

}  // namespace dscc
