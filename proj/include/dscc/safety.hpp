#pragma once

// Control Lyapunov and reciprocal barrier terms for one subsystem. Every
// function here sees only the subsystem's local state and constant setpoints.

#include "dscc/equilibrium.hpp"
#include "dscc/model.hpp"
#include "dscc/nominal.hpp"

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dscc {

/// The protected scalar left (or touched) its safe interval.
class SafeSetViolation : public std::runtime_error {
public:
    SafeSetViolation(std::size_t subsystem, double value, Interval limits);

    std::size_t subsystem() const { return subsystem_; }
    double value() const { return value_; }
    const Interval& limits() const { return limits_; }

private:
    std::size_t subsystem_;
    double value_;
    Interval limits_;
};

struct ClfTerms {
    double H = 0.0;       ///< x^T Q x / 2 in error coordinates [J]
    double LfH = 0.0;     ///< dH(x^)^T f(x), drift without coupling [W]
    double LgH = 0.0;     ///< dH(x^)^T g(x) [W per input unit]
    double port = 0.0;    ///< y^^T z*, the coupling power at the setpoint [W]
    double margin = 0.0;  ///< clf_rate |x^|^2 [W]
    double u_star = 0.0;  ///< steady input of the subsystem
    double error_sq = 0.0;

    /// Argument of gamma: the decay condition in error coordinates,
    /// LfH + LgH u* + margin + port (<= -LgH u^ is required).
    double decay_argument() const { return LfH + LgH * u_star + margin + port; }
};

struct CbfTerms {
    double s = 0.0;        ///< protected scalar (v_j or i_f)
    double h = 0.0;        ///< (s - s_min)(s - s_max), negative inside
    double B = 0.0;        ///< -1/h
    double dB = 0.0;       ///< dB/ds
    double LfB = 0.0;
    double LgB = 0.0;
    double rhs = 0.0;      ///< beta / B
    bool bounded = true;   ///< false when a limit is infinite: the row is vacuous
};

/// Local state of subsystem j: (v_j, i_t_j) or (v_b, i_f, v_l).
ClfTerms clf_terms(const MicrogridParams& params, const ControllerConfig& cfg, const Equilibrium& eq, std::size_t j,
                   const Eigen::Ref<const Eigen::VectorXd>& x_j);

/// Throws SafeSetViolation unless the protected scalar is strictly inside its limits.
CbfTerms cbf_terms(const MicrogridParams& params, const ControllerConfig& cfg, std::size_t j,
                   const Eigen::Ref<const Eigen::VectorXd>& x_j);

/// Reciprocal barrier -1/((s - lo)(s - hi)) and its derivative; no range check.
double reciprocal_barrier(double s, const Interval& limits);
double reciprocal_barrier_derivative(double s, const Interval& limits);

/// Weight vector diag(C_1, L_1, ..., C_b, L_f, C_l) of the global CLF.
Eigen::VectorXd clf_weights(const MicrogridParams& params);

/// H(x^) = x^T Q x^ / 2 for the whole network.
double global_clf(const MicrogridParams& params, const Equilibrium& eq, const SystemState& state);

/// dH/dt = (Q x^)^T xdot at the given state and applied input.
double global_clf_rate(const MicrogridParams& params, const Equilibrium& eq, const SystemState& state,
                       const ControlInput& input);

}  // namespace dscc
