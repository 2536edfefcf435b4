#include "dscc/batch.hpp"

#include "dscc/verify.hpp"

#include <cstdlib>
#include <random>

#include <omp.h>

namespace dscc {
namespace {

SweepOutcome run_one(const Scenario& sc) {
    SweepOutcome out;
    out.x_initial = sc.initial_state.values();
    try {
        const SimResult r = run(sc);
        out.status = r.status;
        out.message = r.message;
        out.safe = safety_verdict(r.trace, sc.cfg, sc.params.num_sources()).pass;
        out.H_initial = r.trace.front().H;
        out.H_final = r.trace.back().H;
        out.x_final = r.trace.back().x;
    } catch (const std::exception& e) {
        out.ran = false;
        out.safe = false;
        out.message = e.what();
    }
    return out;
}

}  // namespace

int sim_threads() {
    if (const char* env = std::getenv("DSCC_SIM_THREADS")) {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && n > 0) {
            return static_cast<int>(n);
        }
    }
    return omp_get_max_threads();
}

std::vector<QpSolution> solve_batch_serial(const std::vector<QpProblem>& problems) {
    std::vector<QpSolution> out(problems.size());
    for (std::size_t i = 0; i < problems.size(); ++i) {
        out[i] = solve(problems[i]);
    }
    return out;
}

std::vector<QpSolution> solve_batch(const std::vector<QpProblem>& problems, int threads) {
    std::vector<QpSolution> out(problems.size());
    const auto n = static_cast<std::ptrdiff_t>(problems.size());
#pragma omp parallel for schedule(static) num_threads(threads > 0 ? threads : sim_threads())
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = solve(problems[static_cast<std::size_t>(i)]);
    }
    return out;
}

std::vector<Scenario> perturbed_scenarios(const Scenario& base, std::size_t count, std::uint64_t seed) {
    std::vector<Scenario> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::mt19937_64 rng(seed + i);
        Scenario sc = base;
        sc.seed = seed + i;
        sc.initial_state = random_state(base.params, base.cfg, rng, true);
        out.push_back(std::move(sc));
    }
    return out;
}

std::vector<SweepOutcome> run_sweep_serial(const std::vector<Scenario>& scenarios) {
    std::vector<SweepOutcome> out(scenarios.size());
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
        out[i] = run_one(scenarios[i]);
    }
    return out;
}

std::vector<SweepOutcome> run_sweep(const std::vector<Scenario>& scenarios, int threads) {
    std::vector<SweepOutcome> out(scenarios.size());
    const auto n = static_cast<std::ptrdiff_t>(scenarios.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads > 0 ? threads : sim_threads())
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = run_one(scenarios[static_cast<std::size_t>(i)]);
    }
    return out;
}

}  // namespace dscc
