#pragma once

// Averaged single-bus DC microgrid: circuit parameters, state layout, the
// KVL/KCL right-hand sides and their port-Hamiltonian decomposition.
//
// Subsystem indices are zero-based in code: sources are 0..k-2 and the
// bus/load subsystem is k-1.

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace dscc {

/// Raised when parameters, dimensions or numeric inputs violate a contract.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct SourceParams {
    double C = 0.0;  ///< converter output capacitance [F]
    double L = 0.0;  ///< line inductance [H]
    double R = 0.0;  ///< line resistance [Ohm]
    // Switched-circuit values kept for provenance; the averaged model ignores them.
    double L_s = 0.0;
    double r_s = 0.0;
    double V_g = 0.0;

    bool operator==(const SourceParams&) const = default;
};

struct LoadParams {
    double C_b = 0.0;  ///< bus capacitance [F]
    double R_l = 0.0;  ///< resistive load [Ohm]; +inf means open circuit
    double L_f = 0.0;  ///< filter inductance [H]
    double C_l = 0.0;  ///< load-converter output capacitance [F]
    double r_l = 0.0;  ///< DC load resistance [Ohm]
    double r_f = 0.0;  ///< filter parasitic, unused by the averaged model

    bool operator==(const LoadParams&) const = default;
};

struct MicrogridParams {
    std::vector<SourceParams> sources;
    LoadParams load;
    double v_b_star = 0.0;  ///< bus voltage setpoint [V]
    double d_l_star = 0.0;  ///< load converter duty ratio setpoint

    /// Number of subsystems (sources + the bus/load subsystem).
    std::size_t k() const { return sources.size() + 1; }
    std::size_t num_sources() const { return sources.size(); }
    std::size_t state_dim() const { return 2 * sources.size() + 3; }

    /// Throws ValidationError naming the first violated invariant.
    void validate() const;

    /// Reference two-source circuit with v_b* = 32 V, d_l* = 0.5 and C_l = 0.47 mF.
    static MicrogridParams table3();

    bool operator==(const MicrogridParams&) const = default;
};

/// Flat state vector (v_1, i_t_1, ..., v_n, i_t_n, v_b, i_f, v_l).
class SystemState {
public:
    SystemState() = default;
    explicit SystemState(std::size_t num_sources);
    SystemState(std::size_t num_sources, Eigen::VectorXd values);

    std::size_t num_sources() const { return num_sources_; }
    std::size_t size() const { return static_cast<std::size_t>(x_.size()); }

    static std::size_t v_index(std::size_t j) { return 2 * j; }
    static std::size_t i_t_index(std::size_t j) { return 2 * j + 1; }
    std::size_t v_b_index() const { return 2 * num_sources_; }
    std::size_t i_f_index() const { return 2 * num_sources_ + 1; }
    std::size_t v_l_index() const { return 2 * num_sources_ + 2; }

    double v(std::size_t j) const { return x_[static_cast<Eigen::Index>(v_index(j))]; }
    double i_t(std::size_t j) const { return x_[static_cast<Eigen::Index>(i_t_index(j))]; }
    double v_b() const { return x_[static_cast<Eigen::Index>(v_b_index())]; }
    double i_f() const { return x_[static_cast<Eigen::Index>(i_f_index())]; }
    double v_l() const { return x_[static_cast<Eigen::Index>(v_l_index())]; }
    double line_current_sum() const;

    /// Local state of subsystem j: (v_j, i_t_j) for sources, (v_b, i_f, v_l) for the load.
    Eigen::VectorXd subsystem(std::size_t j) const;

    const Eigen::VectorXd& values() const { return x_; }
    Eigen::VectorXd& values() { return x_; }
    double operator[](std::size_t i) const { return x_[static_cast<Eigen::Index>(i)]; }
    double& operator[](std::size_t i) { return x_[static_cast<Eigen::Index>(i)]; }

    bool all_finite() const { return x_.allFinite(); }

    bool operator==(const SystemState& o) const {
        return num_sources_ == o.num_sources_ && x_.size() == o.x_.size() && x_ == o.x_;
    }

    /// Column names in storage order, e.g. "v_1", "i_t_1", ..., "v_l".
    static std::vector<std::string> names(std::size_t num_sources);

private:
    std::size_t num_sources_ = 0;
    Eigen::VectorXd x_;
};

struct ControlInput {
    std::vector<double> i_s;  ///< source current commands [A]
    double d_l = 0.0;         ///< load duty ratio

    /// Control of subsystem j: i_s[j] for sources, d_l for the load.
    double component(std::size_t j) const { return j < i_s.size() ? i_s[j] : d_l; }
    void set_component(std::size_t j, double value);
    bool all_finite() const;

    bool operator==(const ControlInput&) const = default;
};

struct ClampedDuty {
    double value = 0.0;
    bool clamped = false;
};

/// Saturates the duty ratio to [0, 1]; `clamped` reports whether it moved.
ClampedDuty clamp_duty(double d_l);

/// d/dt (v_j, i_t_j) of source j.
std::array<double, 2> source_rhs(const MicrogridParams& params, std::size_t j, double v_j, double i_t_j,
                                 double v_b, double i_s_j);

/// d/dt (v_b, i_f, v_l) of the bus/load subsystem; i_t_sum is the total line current.
std::array<double, 3> load_rhs(const MicrogridParams& params, double v_b, double i_f, double v_l,
                               double i_t_sum, double d_l);

/// Stacked right-hand side in SystemState order.
Eigen::VectorXd global_rhs(const MicrogridParams& params, const SystemState& state, const ControlInput& input);

/// Allocation-free variant used by the integrator; no finiteness checks.
void global_rhs_into(const MicrogridParams& params, const Eigen::VectorXd& x, const ControlInput& input,
                     Eigen::VectorXd& dx);

enum class SubsystemKind { Source, Load };

/// One port-Hamiltonian subsystem
///   xdot = (J - R) Q x + g(x) u + g_z z,   y = g_z^T Q x,   H = x^T Q x / 2.
///
/// Sign convention: source ports carry z = -v_b and y = i_t; the load port
/// carries z = (i_t_1, ..., i_t_n) and y = (v_b, ..., v_b), so that the port
/// powers y^T z cancel exactly across the network.
struct PhSubsystem {
    std::size_t index = 0;
    SubsystemKind kind = SubsystemKind::Source;
    Eigen::MatrixXd J;
    Eigen::MatrixXd R;
    Eigen::VectorXd Q;      ///< diagonal of the Hamiltonian weight
    Eigen::MatrixXd g_z;    ///< coupling map, n_j x p_j
    double inv_C_b = 0.0;   ///< load only: needed by the state-dependent input map
    double inv_L_f = 0.0;

    std::size_t dim() const { return static_cast<std::size_t>(Q.size()); }
    double hamiltonian(const Eigen::VectorXd& x) const;
    Eigen::VectorXd gradient(const Eigen::VectorXd& x) const { return Q.cwiseProduct(x); }
    /// g_j(x_j); the load's depends on (v_b, i_f).
    Eigen::VectorXd input_map(const Eigen::VectorXd& x) const;
    Eigen::VectorXd output(const Eigen::VectorXd& x) const { return g_z.transpose() * gradient(x); }
    /// Drift f_j(x_j) = (J - R) Q x, without the coupling term.
    Eigen::VectorXd drift(const Eigen::VectorXd& x) const { return (J - R) * gradient(x); }
    Eigen::VectorXd dynamics(const Eigen::VectorXd& x, double u, const Eigen::VectorXd& z) const;
};

std::vector<PhSubsystem> build_ph_subsystems(const MicrogridParams& params);

/// Coupling input z_j seen by subsystem j at the given global state.
Eigen::VectorXd coupling_input(const PhSubsystem& sub, const SystemState& state);

struct GiphReport {
    bool ok = true;
    std::string failure;     ///< first violated property, empty when ok
    double port_sum = 0.0;   ///< sum_j y_j^T z_j
    double port_scale = 0.0; ///< sum_j |y_j^T z_j|
};

/// Checks skew-symmetric J, symmetric PSD R and port cancellation at `state`.
GiphReport validate_giph(const std::vector<PhSubsystem>& subsystems, const SystemState& state);

}  // namespace dscc
