#pragma once

// trace.csv (one row per controller sample, 17 significant digits) and
// summary.json.

#include "dscc/sim.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dscc {

struct RunSummary {
    std::string controller;
    std::string clf_mode;
    RunStatus status = RunStatus::Ok;
    std::string message;
    std::uint64_t seed = 0;
    double t_last = 0.0;
    std::size_t records = 0;
    double window = 0.0;               ///< window actually used for the means
    std::vector<SignalStats> signals;  ///< empty for traces with fewer than two records
    SafetyVerdict verdict;
    std::vector<std::pair<std::string, std::optional<double>>> settling;  ///< per state, 1% band
    std::size_t clamp_samples = 0;
    std::size_t qp_fault_samples = 0;
    std::size_t clf_relaxed_samples = 0;
    std::size_t cbf_active_samples = 0;
    std::size_t event_samples = 0;
    double H_initial = 0.0;
    double H_final = 0.0;
    Equilibrium equilibrium;
};

RunSummary summarize(const Scenario& scenario, const SimResult& result);
nlohmann::json summary_to_json(const RunSummary& summary);
nlohmann::json equilibrium_to_json(const Equilibrium& eq);

std::vector<std::string> trace_columns(std::size_t num_sources);
void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace, std::size_t num_sources);

/// Writes dir/trace.csv and dir/summary.json, creating dir if needed.
/// Throws std::runtime_error naming the path on I/O failure.
void write_trace(const Scenario& scenario, const SimResult& result, const std::string& dir);

struct LoadedTrace {
    std::size_t num_sources = 0;
    std::vector<TraceRecord> records;
};

/// Parses a file produced by write_trace_csv; throws ValidationError on malformed input.
LoadedTrace read_trace_csv(const std::string& path);

}  // namespace dscc
