#pragma once

#include "dscc/model.hpp"

#include <vector>

namespace dscc {

/// Loss-minimizing steady state for the configured (v_b*, d_l*).
struct Equilibrium {
    std::vector<double> v_star;    ///< per-source terminal voltage [V]
    std::vector<double> i_t_star;  ///< per-source line current [A]
    std::vector<double> i_s_star;  ///< per-source current command [A]
    double v_b_star = 0.0;
    double i_f_star = 0.0;
    double v_l_star = 0.0;
    double d_l_star = 0.0;
    double total_load_current = 0.0;  ///< sum of line currents drawn by the bus [A]

    SystemState state() const;
    ControlInput input() const;
    /// Steady control of subsystem j (i_s_j* or d_l*).
    double input_component(std::size_t j) const { return j < i_s_star.size() ? i_s_star[j] : d_l_star; }
    /// Setpoint slice of the state for subsystem j.
    Eigen::VectorXd subsystem(std::size_t j) const { return state().subsystem(j); }
};

/// Conductance-proportional dispatch: i_t_j* = I (1/R_j) / sum_i (1/R_i) with
/// I = v_b*/R_l + d_l* i_f* and i_f* = d_l* v_b* / r_l.
Equilibrium solve_dispatch(const MicrogridParams& params);

/// Line loss sum_j i_t_j^2 R_j of a current split.
double line_loss(const MicrogridParams& params, const std::vector<double>& i_t);

struct DispatchOptimalityReport {
    bool optimal = true;
    double equilibrium_loss = 0.0;
    double best_grid_loss = 0.0;
    std::vector<double> best_split;  ///< the better grid point when !optimal
    std::size_t points_checked = 0;
};

/// Grid search over current splits satisfying the bus KCL constraint. With
/// two sources the whole constraint line in [-2|I|, 2|I|] is scanned; with
/// more sources a box of half-width `local_span` around eq is used.
DispatchOptimalityReport verify_dispatch_optimality(const MicrogridParams& params, const Equilibrium& eq,
                                                    double step = 0.01, double local_span = 0.5,
                                                    double tolerance = 1e-6);

}  // namespace dscc
