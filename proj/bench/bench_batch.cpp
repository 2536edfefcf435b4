// Serial reference vs OpenMP kernels for batched QPs and scenario sweeps.

#include "dscc/batch.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace dscc;

namespace {

std::vector<QpProblem> problems(std::size_t n) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-5.0, 5.0), m(0.1, 100.0);
    std::vector<QpProblem> out(n);
    for (auto& p : out) {
        p.u0 = u(rng);
        p.m = m(rng);
        p.a_V = u(rng);
        p.b_V = u(rng);
        p.a_B = u(rng);
        p.b_B = u(rng);
    }
    return out;
}

std::vector<Scenario> sweep(std::size_t n) {
    Scenario base = Scenario::table3();
    base.t_end = 0.02;
    return perturbed_scenarios(base, n, 1);
}

void BM_QpSerial(benchmark::State& state) {
    const auto p = problems(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve_batch_serial(p));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_QpParallel(benchmark::State& state) {
    const auto p = problems(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve_batch(p));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_SweepSerial(benchmark::State& state) {
    const auto s = sweep(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(run_sweep_serial(s));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_SweepParallel(benchmark::State& state) {
    const auto s = sweep(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(run_sweep(s));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_QpSerial)->Arg(1 << 12)->Arg(1 << 18);
BENCHMARK(BM_QpParallel)->Arg(1 << 12)->Arg(1 << 18)->UseRealTime();
BENCHMARK(BM_SweepSerial)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SweepParallel)->Arg(16)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
