// dscc: command-line front end for the microgrid simulator.
//
// Exit codes: 0 success, 1 usage, 2 validation failure, 3 safety violation,
// 4 divergence.

#include "dscc/batch.hpp"
#include "dscc/scenario_io.hpp"
#include "dscc/svg.hpp"
#include "dscc/trace_io.hpp"
#include "dscc/verify.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

namespace {

enum Exit { kOk = 0, kUsage = 1, kValidation = 2, kSafety = 3, kDivergence = 4 };

struct RunArgs {
    std::string scenario;
    std::string out;
    std::string controller;
    std::string clf_mode;
    std::optional<std::uint64_t> seed;
    std::optional<double> dt;
    std::optional<double> t_end;
    bool no_plots = false;
};

int cmd_run(const RunArgs& a) {
    dscc::Scenario sc = dscc::load_scenario(a.scenario);
    if (!a.controller.empty()) {
        sc.controller = dscc::controller_kind_from_string(a.controller);
    }
    if (!a.clf_mode.empty()) {
        sc.cfg.clf_mode = dscc::clf_mode_from_string(a.clf_mode);
    }
    if (a.seed) {
        sc.seed = *a.seed;
    }
    if (a.dt) {
        sc.dt = *a.dt;
    }
    if (a.t_end) {
        sc.t_end = *a.t_end;
    }
    if (a.no_plots) {
        sc.output.plots = false;
    }
    const std::string dir = !a.out.empty() ? a.out : (!sc.output.dir.empty() ? sc.output.dir : "out");

    const dscc::SimResult result = dscc::run(sc);
    dscc::write_trace(sc, result, dir);
    if (sc.output.plots && !result.trace.empty()) {
        dscc::render_plots(result.trace, sc.params.num_sources(), &sc.cfg, dir);
    }
    const dscc::RunSummary s = dscc::summarize(sc, result);
    fmt::print("controller  {} ({})\n", s.controller, s.clf_mode);
    fmt::print("status      {}{}\n", dscc::to_string(s.status), s.message.empty() ? "" : ": " + s.message);
    fmt::print("records     {} (t_last = {:g} s)\n", s.records, s.t_last);
    if (!s.signals.empty()) {
        fmt::print("means over the final {:g} s:\n", s.window);
        for (const auto& sig : s.signals) {
            fmt::print("  {:<6} mean {:>12.6g}  min {:>12.6g}  max {:>12.6g}\n", sig.name, sig.mean, sig.min, sig.max);
        }
    }
    fmt::print("H           {:.6g} -> {:.6g}\n", s.H_initial, s.H_final);
    fmt::print("counts      clamp {}, cbf-active {}, qp-fault {}, clf-relaxed {}\n", s.clamp_samples,
               s.cbf_active_samples, s.qp_fault_samples, s.clf_relaxed_samples);
    if (s.verdict.pass) {
        fmt::print("safety      pass\n");
    } else {
        const auto& v = *s.verdict.first;
        fmt::print("safety      FAIL: {} = {:.6g} outside [{:g}, {:g}] at t = {:.6g} s\n", v.signal, v.value,
                   v.limits.min, v.limits.max, v.t);
    }
    fmt::print("output      {}\n", dir);
    if (result.status == dscc::RunStatus::Diverged) {
        return kDivergence;
    }
    if (result.status == dscc::RunStatus::EjectedFromSafeSet || !s.verdict.pass) {
        return kSafety;
    }
    return kOk;
}

int cmd_equilibrium(const std::string& path, bool as_json) {
    const dscc::Scenario sc = dscc::load_scenario(path);
    const dscc::Equilibrium eq = dscc::solve_dispatch(sc.params);
    if (as_json) {
        fmt::print("{}\n", dscc::equilibrium_to_json(eq).dump(2));
        return kOk;
    }
    fmt::print("{:<10} {:>12}\n", "quantity", "value");
    for (std::size_t j = 0; j < eq.v_star.size(); ++j) {
        fmt::print("{:<10} {:>12.4f} V\n", fmt::format("v_{}*", j + 1), eq.v_star[j]);
        fmt::print("{:<10} {:>12.4f} A\n", fmt::format("i_t{}*", j + 1), eq.i_t_star[j]);
        fmt::print("{:<10} {:>12.4f} A\n", fmt::format("i_s{}*", j + 1), eq.i_s_star[j]);
    }
    fmt::print("{:<10} {:>12.4f} V\n", "v_b*", eq.v_b_star);
    fmt::print("{:<10} {:>12.4f} A\n", "i_f*", eq.i_f_star);
    fmt::print("{:<10} {:>12.4f} V\n", "v_l*", eq.v_l_star);
    fmt::print("{:<10} {:>12.4f}\n", "d_l*", eq.d_l_star);
    fmt::print("{:<10} {:>12.4f} A\n", "sum i_t*", eq.total_load_current);
    fmt::print("{:<10} {:>12.4f} W\n", "line loss", dscc::line_loss(sc.params, eq.i_t_star));
    return kOk;
}

int cmd_verify(const std::string& path, const dscc::VerifyOptions& options) {
    const dscc::Scenario sc = dscc::load_scenario(path);
    const dscc::VerifyReport report = dscc::run_verification(sc.params, sc.cfg, options);
    for (const auto& c : report.checks) {
        fmt::print("[{}] {}: {}\n", c.pass ? "PASS" : "FAIL", c.name, c.detail);
    }
    fmt::print("{}\n", report.pass() ? "verify: all checks passed" : "verify: FAILED");
    return report.pass() ? kOk : kValidation;
}

int cmd_compare(const std::string& a_path, const std::string& b_path, const std::string& out,
                const std::string& scenario_path) {
    const dscc::LoadedTrace a = dscc::read_trace_csv(a_path);
    const dscc::LoadedTrace b = dscc::read_trace_csv(b_path);
    if (a.num_sources != b.num_sources) {
        throw dscc::ValidationError("compare: traces have different numbers of sources");
    }
    std::optional<dscc::Scenario> sc;
    if (!scenario_path.empty()) {
        sc = dscc::load_scenario(scenario_path);
    }
    const auto label = [](const std::string& p) { return std::filesystem::path(p).parent_path().filename().string(); };
    std::string la = label(a_path);
    std::string lb = label(b_path);
    if (la.empty() || la == lb) {
        la = "a";
        lb = "b";
    }
    if (!a.records.empty() && !b.records.empty()) {
        dscc::render_comparison(a.records, la, b.records, lb, a.num_sources, sc ? &sc->cfg : nullptr, out);
    }
    // Differences on samples present in both traces (matched by time).
    const auto names = dscc::SystemState::names(a.num_sources);
    std::vector<double> max_diff(names.size(), 0.0);
    std::size_t matched = 0;
    std::size_t ib = 0;
    for (const auto& ra : a.records) {
        while (ib < b.records.size() && b.records[ib].t < ra.t - 1e-12) {
            ++ib;
        }
        if (ib == b.records.size()) {
            break;
        }
        if (std::abs(b.records[ib].t - ra.t) > 1e-12) {
            continue;
        }
        ++matched;
        for (std::size_t i = 0; i < names.size(); ++i) {
            const auto idx = static_cast<Eigen::Index>(i);
            max_diff[i] = std::max(max_diff[i], std::abs(ra.x[idx] - b.records[ib].x[idx]));
        }
    }
    fmt::print("{} vs {}: {} and {} records, {} matched by time\n", la, lb, a.records.size(), b.records.size(),
               matched);
    fmt::print("{:<6} {:>14} {:>14} {:>14}\n", "signal", "max |a-b|", "final a", "final b");
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto idx = static_cast<Eigen::Index>(i);
        fmt::print("{:<6} {:>14.6g} {:>14.6g} {:>14.6g}\n", names[i], max_diff[i],
                   a.records.empty() ? NAN : a.records.back().x[idx], b.records.empty() ? NAN : b.records.back().x[idx]);
    }
    fmt::print("plots  {}\n", out);
    return kOk;
}

int cmd_sweep(const std::string& path, std::size_t count, std::uint64_t seed, int threads, bool serial,
              const std::string& out) {
    const dscc::Scenario base = dscc::load_scenario(path);
    const auto scenarios = dscc::perturbed_scenarios(base, count, seed);
    const auto outcomes = serial ? dscc::run_sweep_serial(scenarios) : dscc::run_sweep(scenarios, threads);
    std::filesystem::create_directories(out);
    const std::string csv_path = (std::filesystem::path(out) / "sweep.csv").string();
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) {
        throw std::runtime_error(csv_path + ": cannot open for writing");
    }
    const auto names = dscc::SystemState::names(base.params.num_sources());
    csv << "run,seed,status,safe,H_initial,H_final";
    for (const auto& n : names) {
        csv << ",init_" << n;
    }
    for (const auto& n : names) {
        csv << ",final_" << n;
    }
    csv << '\n';
    std::size_t ok = 0;
    std::size_t safe = 0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const auto& o = outcomes[i];
        ok += o.ran && o.status == dscc::RunStatus::Ok;
        safe += o.safe;
        csv << fmt::format("{},{},{},{},{:.17g},{:.17g}", i, scenarios[i].seed,
                           o.ran ? dscc::to_string(o.status) : "invalid", o.safe ? 1 : 0, o.H_initial, o.H_final);
        for (Eigen::Index c = 0; c < o.x_initial.size(); ++c) {
            csv << fmt::format(",{:.17g}", o.x_initial[c]);
        }
        for (std::size_t c = 0; c < names.size(); ++c) {
            csv << fmt::format(",{:.17g}", o.ran ? o.x_final[static_cast<Eigen::Index>(c)] : NAN);
        }
        csv << '\n';
    }
    fmt::print("sweep: {} runs, {} completed, {} safe; {}\n", outcomes.size(), ok, safe, csv_path);
    return safe == outcomes.size() ? kOk : kSafety;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Decentralized safety-critical control of a single-bus DC microgrid (averaged model)"};
    app.require_subcommand(1);

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "Simulate a scenario; writes trace.csv, summary.json and SVG plots");
    run->add_option("scenario", run_args.scenario, "Scenario JSON file")->required();
    run->add_option("--out", run_args.out, "Output directory (default: output.dir, else ./out)");
    run->add_option("--controller", run_args.controller, "Override controller.kind")
        ->check(CLI::IsMember({"dscc", "idapbc", "open-loop"}));
    run->add_option("--clf-mode", run_args.clf_mode, "Override controller.clf_mode")
        ->check(CLI::IsMember({"relaxed", "exact"}));
    run->add_option("--seed", run_args.seed, "Override integration.seed");
    run->add_option("--dt", run_args.dt, "Override integration.dt [s] (default 1e-6)");
    run->add_option("--t-end", run_args.t_end, "Override integration.t_end [s] (default 0.5)");
    run->add_flag("--no-plots", run_args.no_plots, "Skip SVG output");

    std::string eq_path;
    bool eq_json = false;
    auto* equilibrium = app.add_subcommand("equilibrium", "Print the loss-minimizing steady state");
    equilibrium->add_option("scenario", eq_path, "Scenario JSON file")->required();
    equilibrium->add_flag("--json", eq_json, "Print JSON instead of a table");

    std::string verify_path;
    dscc::VerifyOptions verify_options;
    auto* verify = app.add_subcommand("verify", "Run the structural and numerical self-checks");
    verify->add_option("scenario", verify_path, "Scenario JSON file")->required();
    verify->add_option("--seed", verify_options.seed, "Random seed for sampled checks (default 0)");
    verify->add_option("--qp-samples", verify_options.qp_samples, "Random QPs checked against the reference (default 10000)");

    std::string cmp_a, cmp_b, cmp_out = "compare", cmp_scenario;
    auto* compare = app.add_subcommand("compare", "Overlay two traces and summarize their differences");
    compare->add_option("a", cmp_a, "First trace.csv")->required();
    compare->add_option("b", cmp_b, "Second trace.csv")->required();
    compare->add_option("--out", cmp_out, "Directory for the overlay SVGs (default ./compare)");
    compare->add_option("--scenario", cmp_scenario, "Scenario whose limits are drawn");

    std::string schema_out;
    auto* schema = app.add_subcommand("schema", "Print the scenario file reference (Markdown)");
    schema->add_option("--out", schema_out, "Write to a file instead of stdout");

    std::string sweep_path, sweep_out = "sweep";
    std::size_t sweep_count = 16;
    std::uint64_t sweep_seed = 1;
    int sweep_threads = 0;
    bool sweep_serial = false;
    auto* sweep = app.add_subcommand("sweep", "Run the scenario from randomized initial states in parallel");
    sweep->add_option("scenario", sweep_path, "Scenario JSON file")->required();
    sweep->add_option("--count", sweep_count, "Number of runs (default 16)");
    sweep->add_option("--seed", sweep_seed, "Base seed; run i uses seed + i (default 1)");
    sweep->add_option("--threads", sweep_threads, "Worker threads (default: DSCC_SIM_THREADS or all cores)");
    sweep->add_flag("--serial", sweep_serial, "Use the serial reference loop");
    sweep->add_option("--out", sweep_out, "Output directory for sweep.csv (default ./sweep)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*run) {
            return cmd_run(run_args);
        }
        if (*equilibrium) {
            return cmd_equilibrium(eq_path, eq_json);
        }
        if (*verify) {
            return cmd_verify(verify_path, verify_options);
        }
        if (*compare) {
            return cmd_compare(cmp_a, cmp_b, cmp_out, cmp_scenario);
        }
        if (*schema) {
            const std::string doc = dscc::scenario_schema_markdown();
            if (schema_out.empty()) {
                fmt::print("{}", doc);
            } else {
                std::ofstream f(schema_out);
                if (!(f << doc)) {
                    throw std::runtime_error(schema_out + ": cannot write");
                }
            }
            return kOk;
        }
        if (*sweep) {
            return cmd_sweep(sweep_path, sweep_count, sweep_seed, sweep_threads, sweep_serial, sweep_out);
        }
    } catch (const dscc::ValidationError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kValidation;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kValidation;
    }
    return kUsage;
}
