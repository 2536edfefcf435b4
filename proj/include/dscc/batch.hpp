#pragma once

// Data-parallel layer: many independent QPs or scenarios at once. Each
// OpenMP kernel has a serial reference with identical results.

#include "dscc/qp.hpp"
#include "dscc/sim.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dscc {

/// DSCC_SIM_THREADS if set to a positive integer, else the OpenMP default.
int sim_threads();

std::vector<QpSolution> solve_batch_serial(const std::vector<QpProblem>& problems);
/// threads <= 0 means sim_threads().
std::vector<QpSolution> solve_batch(const std::vector<QpProblem>& problems, int threads = 0);

struct SweepOutcome {
    RunStatus status = RunStatus::Ok;
    bool safe = true;
    double H_initial = 0.0;
    double H_final = 0.0;
    Eigen::VectorXd x_initial;
    Eigen::VectorXd x_final;
    std::string message;  ///< run message, or the validation error that prevented the run
    bool ran = true;
};

/// Copies of `base` whose initial state is redrawn: protected scalars
/// uniformly inside their limits, the rest over wide physical ranges.
/// Scenario i uses seed `seed + i`, so results do not depend on scheduling.
std::vector<Scenario> perturbed_scenarios(const Scenario& base, std::size_t count, std::uint64_t seed);

std::vector<SweepOutcome> run_sweep_serial(const std::vector<Scenario>& scenarios);
std::vector<SweepOutcome> run_sweep(const std::vector<Scenario>& scenarios, int threads = 0);

}  // namespace dscc
