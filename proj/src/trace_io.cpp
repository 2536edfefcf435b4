#include "dscc/trace_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace dscc {
namespace {

std::vector<std::string> input_names(std::size_t num_sources) {
    std::vector<std::string> names;
    for (std::size_t j = 0; j < num_sources; ++j) {
        names.push_back(fmt::format("i_s_{}", j + 1));
    }
    names.push_back("d_l");
    return names;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw std::runtime_error(dir + ": cannot create directory: " + ec.message());
    }
}

}  // namespace

RunSummary summarize(const Scenario& sc, const SimResult& result) {
    RunSummary s;
    s.controller = to_string(sc.controller);
    s.clf_mode = to_string(sc.cfg.clf_mode);
    s.status = result.status;
    s.message = result.message;
    s.seed = sc.seed;
    s.records = result.trace.size();
    s.equilibrium = result.equilibrium;
    const std::size_t ns = sc.params.num_sources();
    if (result.trace.empty()) {
        return s;
    }
    s.t_last = result.trace.back().t;
    s.H_initial = result.trace.front().H;
    s.H_final = result.trace.back().H;
    const double span = result.trace.back().t - result.trace.front().t;
    if (result.trace.size() >= 2 && span > 0.0) {
        s.window = std::min(sc.output.summary_window, span);
        s.signals = steady_state_summary(result.trace, s.window, ns);
    }
    s.verdict = safety_verdict(result.trace, sc.cfg, ns);
    const SystemState target = result.equilibrium.state();
    const auto names = SystemState::names(ns);
    for (std::size_t i = 0; i < names.size(); ++i) {
        s.settling.emplace_back(names[i], settling_time(result.trace, i, target[i]));
    }
    for (const auto& r : result.trace) {
        s.clamp_samples += (r.flags & kFlagClamp) != 0;
        s.qp_fault_samples += (r.flags & kFlagQpFault) != 0;
        s.clf_relaxed_samples += (r.flags & kFlagClfRelaxed) != 0;
        s.event_samples += (r.flags & kFlagEventActive) != 0;
        bool cbf = false;
        for (unsigned a : r.active_set) {
            cbf = cbf || (a & kActiveCbf) != 0;
        }
        s.cbf_active_samples += cbf;
    }
    return s;
}

nlohmann::json summary_to_json(const RunSummary& s) {
    using json = nlohmann::json;
    json doc;
    doc["controller"] = s.controller;
    doc["clf_mode"] = s.clf_mode;
    doc["status"] = to_string(s.status);
    doc["message"] = s.message;
    doc["seed"] = s.seed;
    doc["t_last"] = s.t_last;
    doc["records"] = s.records;
    doc["window"] = s.window;
    json signals = json::object();
    for (const auto& sig : s.signals) {
        signals[sig.name] = {{"mean", sig.mean}, {"min", sig.min}, {"max", sig.max}};
    }
    doc["signals"] = signals;
    json verdict = {{"pass", s.verdict.pass}};
    if (s.verdict.first) {
        const auto& v = *s.verdict.first;
        verdict["first_violation"] = {
            {"t", v.t}, {"signal", v.signal}, {"value", v.value}, {"min", v.limits.min}, {"max", v.limits.max}};
    }
    doc["safety"] = verdict;
    json settling = json::object();
    for (const auto& [name, t] : s.settling) {
        settling[name] = t ? json(*t) : json(nullptr);
    }
    doc["settling_time_1pct"] = settling;
    doc["counts"] = {{"clamp", s.clamp_samples},
                     {"qp_fault", s.qp_fault_samples},
                     {"clf_relaxed", s.clf_relaxed_samples},
                     {"cbf_active", s.cbf_active_samples},
                     {"event", s.event_samples}};
    doc["H"] = {{"initial", s.H_initial}, {"final", s.H_final}};
    doc["equilibrium"] = equilibrium_to_json(s.equilibrium);
    return doc;
}

nlohmann::json equilibrium_to_json(const Equilibrium& eq) {
    return {{"v_star", eq.v_star},     {"i_t_star", eq.i_t_star}, {"i_s_star", eq.i_s_star},
            {"v_b_star", eq.v_b_star}, {"i_f_star", eq.i_f_star}, {"v_l_star", eq.v_l_star},
            {"d_l_star", eq.d_l_star}, {"total_load_current", eq.total_load_current}};
}

std::vector<std::string> trace_columns(std::size_t num_sources) {
    std::vector<std::string> cols{"t"};
    for (const auto& n : SystemState::names(num_sources)) {
        cols.push_back(n);
    }
    const auto inputs = input_names(num_sources);
    for (const auto& n : inputs) {
        cols.push_back("nom_" + n);
    }
    for (const auto& n : inputs) {
        cols.push_back("cmd_" + n);
    }
    for (const auto& n : inputs) {
        cols.push_back(n);
    }
    for (const char* prefix : {"H_", "B_", "delta_", "active_"}) {
        for (std::size_t j = 0; j <= num_sources; ++j) {
            cols.push_back(fmt::format("{}{}", prefix, j + 1));
        }
    }
    cols.insert(cols.end(), {"H", "Hdot", "flags"});
    return cols;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace, std::size_t num_sources) {
    const auto cols = trace_columns(num_sources);
    fmt::memory_buffer buf;
    for (std::size_t i = 0; i < cols.size(); ++i) {
        fmt::format_to(std::back_inserter(buf), "{}{}", i ? "," : "", cols[i]);
    }
    buf.push_back('\n');
    auto num = [&](double v) { fmt::format_to(std::back_inserter(buf), ",{:.17g}", v); };
    for (const auto& r : trace) {
        fmt::format_to(std::back_inserter(buf), "{:.17g}", r.t);
        for (Eigen::Index i = 0; i < r.x.size(); ++i) {
            num(r.x[i]);
        }
        for (const auto* v : {&r.u_nominal, &r.u_command, &r.u_applied, &r.H_j, &r.B_j, &r.delta}) {
            for (double x : *v) {
                num(x);
            }
        }
        for (unsigned a : r.active_set) {
            fmt::format_to(std::back_inserter(buf), ",{}", a);
        }
        num(r.H);
        num(r.Hdot);
        fmt::format_to(std::back_inserter(buf), ",{}\n", r.flags);
        if (buf.size() > (1u << 20)) {
            out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
            buf.clear();
        }
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

void write_trace(const Scenario& scenario, const SimResult& result, const std::string& dir) {
    ensure_dir(dir);
    const std::string csv_path = (std::filesystem::path(dir) / "trace.csv").string();
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) {
        throw std::runtime_error(csv_path + ": cannot open for writing");
    }
    write_trace_csv(csv, result.trace, scenario.params.num_sources());
    if (!csv.flush()) {
        throw std::runtime_error(csv_path + ": write failed");
    }
    const std::string json_path = (std::filesystem::path(dir) / "summary.json").string();
    std::ofstream js(json_path, std::ios::binary);
    if (!js) {
        throw std::runtime_error(json_path + ": cannot open for writing");
    }
    js << summary_to_json(summarize(scenario, result)).dump(2) << '\n';
    if (!js.flush()) {
        throw std::runtime_error(json_path + ": write failed");
    }
}

LoadedTrace read_trace_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError(path + ": cannot open file");
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw ValidationError(path + ": empty file");
    }
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            header.push_back(cell);
        }
    }
    std::size_t ns = 0;
    while (std::find(header.begin(), header.end(), fmt::format("v_{}", ns + 1)) != header.end()) {
        ++ns;
    }
    if (ns == 0 || header != trace_columns(ns)) {
        throw ValidationError(path + ": header does not match the trace layout");
    }
    LoadedTrace lt;
    lt.num_sources = ns;
    const std::size_t k = ns + 1;
    const std::size_t n = 2 * ns + 3;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) {
            continue;
        }
        std::vector<double> v;
        const char* p = line.c_str();
        while (true) {
            char* end = nullptr;
            const double x = std::strtod(p, &end);
            if (end == p) {
                throw ValidationError(fmt::format("{}:{}: malformed number", path, row));
            }
            v.push_back(x);
            if (*end == '\0') {
                break;
            }
            if (*end != ',') {
                throw ValidationError(fmt::format("{}:{}: expected ','", path, row));
            }
            p = end + 1;
        }
        if (v.size() != header.size()) {
            throw ValidationError(fmt::format("{}:{}: expected {} fields, got {}", path, row, header.size(), v.size()));
        }
        TraceRecord r;
        std::size_t c = 0;
        r.t = v[c++];
        r.x.resize(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            r.x[static_cast<Eigen::Index>(i)] = v[c++];
        }
        for (auto* dst : {&r.u_nominal, &r.u_command, &r.u_applied, &r.H_j, &r.B_j, &r.delta}) {
            dst->assign(v.begin() + static_cast<std::ptrdiff_t>(c), v.begin() + static_cast<std::ptrdiff_t>(c + k));
            c += k;
        }
        for (std::size_t j = 0; j < k; ++j) {
            r.active_set.push_back(static_cast<unsigned>(v[c++]));
        }
        r.H = v[c++];
        r.Hdot = v[c++];
        r.flags = static_cast<unsigned>(v[c++]);
        lt.records.push_back(std::move(r));
    }
    return lt;
}

}  // namespace dscc
