#include "dscc/scenario_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include <fmt/format.h>

namespace dscc {
namespace {

using json = nlohmann::json;
constexpr double kInf = std::numeric_limits<double>::infinity();

std::string join_path(const std::string& where, const std::string& key) {
    return where.empty() ? key : where + "." + key;
}

void check_keys(const json& obj, const std::string& schema_path, const std::string& where) {
    if (!obj.is_object()) {
        throw ValidationError(where + ": expected an object");
    }
    const std::string prefix = schema_path + ".";
    for (const auto& item : obj.items()) {
        const std::string want = prefix + item.key();
        const bool known = std::any_of(scenario_schema().begin(), scenario_schema().end(),
                                       [&](const SchemaField& f) { return f.path == want; });
        if (!known) {
            throw ValidationError(join_path(where, item.key()) + ": unknown key");
        }
    }
}

/// Number at obj[key]; `null` maps to `null_value` when given, a missing key to `fallback`.
double number(const json& obj, const std::string& key, const std::string& where, std::optional<double> fallback,
              std::optional<double> null_value = std::nullopt) {
    const std::string at = join_path(where, key);
    if (!obj.contains(key)) {
        if (!fallback) {
            throw ValidationError(at + ": required");
        }
        return *fallback;
    }
    const json& v = obj.at(key);
    if (v.is_null() && null_value) {
        return *null_value;
    }
    if (!v.is_number()) {
        throw ValidationError(at + ": expected a number");
    }
    return v.get<double>();
}

std::string text(const json& obj, const std::string& key, const std::string& where,
                 std::optional<std::string> fallback) {
    const std::string at = join_path(where, key);
    if (!obj.contains(key)) {
        if (!fallback) {
            throw ValidationError(at + ": required");
        }
        return *fallback;
    }
    if (!obj.at(key).is_string()) {
        throw ValidationError(at + ": expected a string");
    }
    return obj.at(key).get<std::string>();
}

/// Array of `n` numbers; a scalar is broadcast when `broadcast` is set.
std::vector<double> numbers(const json& obj, const std::string& key, const std::string& where, std::size_t n,
                            const std::vector<double>& fallback, bool broadcast = false,
                            std::optional<double> null_value = std::nullopt) {
    const std::string at = join_path(where, key);
    if (!obj.contains(key)) {
        return fallback;
    }
    const json& v = obj.at(key);
    auto one = [&](const json& e, const std::string& where_e) {
        if (e.is_null() && null_value) {
            return *null_value;
        }
        if (!e.is_number()) {
            throw ValidationError(where_e + ": expected a number");
        }
        return e.get<double>();
    };
    if (broadcast && (v.is_number() || v.is_null())) {
        return std::vector<double>(n, one(v, at));
    }
    if (!v.is_array() || v.size() != n) {
        throw ValidationError(fmt::format("{}: expected an array of {} numbers", at, n));
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(one(v[i], fmt::format("{}[{}]", at, i)));
    }
    return out;
}

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

std::size_t signal_index(const std::string& name, std::size_t num_sources, const std::string& at) {
    const auto names = SystemState::names(num_sources);
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) {
        throw ValidationError(at + ": unknown signal \"" + name + "\"");
    }
    return static_cast<std::size_t>(it - names.begin());
}

MicrogridParams parse_params(const json& doc) {
    if (!doc.contains("params")) {
        throw ValidationError("params: required");
    }
    const json& jp = doc.at("params");
    check_keys(jp, "params", "params");
    MicrogridParams p;
    if (!jp.contains("sources") || !jp.at("sources").is_array() || jp.at("sources").empty()) {
        throw ValidationError("params.sources: expected a non-empty array");
    }
    for (std::size_t j = 0; j < jp.at("sources").size(); ++j) {
        const json& js = jp.at("sources")[j];
        const std::string at = fmt::format("params.sources[{}]", j);
        check_keys(js, "params.sources[]", at);
        SourceParams s;
        s.C = number(js, "C", at, std::nullopt);
        s.L = number(js, "L", at, std::nullopt);
        s.R = number(js, "R", at, std::nullopt);
        s.L_s = number(js, "L_s", at, 0.0);
        s.r_s = number(js, "r_s", at, 0.0);
        s.V_g = number(js, "V_g", at, 0.0);
        p.sources.push_back(s);
    }
    if (!jp.contains("load")) {
        throw ValidationError("params.load: required");
    }
    const json& jl = jp.at("load");
    check_keys(jl, "params.load", "params.load");
    p.load.C_b = number(jl, "C_b", "params.load", std::nullopt);
    p.load.R_l = number(jl, "R_l", "params.load", std::nullopt, kInf);
    p.load.L_f = number(jl, "L_f", "params.load", std::nullopt);
    p.load.C_l = number(jl, "C_l", "params.load", 0.47e-3);
    p.load.r_l = number(jl, "r_l", "params.load", std::nullopt);
    p.load.r_f = number(jl, "r_f", "params.load", 0.0);
    p.v_b_star = number(jp, "v_b_star", "params", std::nullopt);
    p.d_l_star = number(jp, "d_l_star", "params", std::nullopt);
    p.validate();
    return p;
}

Event parse_event(const json& je, std::size_t i, std::size_t num_sources) {
    const std::string at = fmt::format("events[{}]", i);
    check_keys(je, "events[]", at);
    const std::string type = text(je, "type", at, std::nullopt);
    auto only = [&](std::initializer_list<const char*> allowed) {
        for (const auto& item : je.items()) {
            if (item.key() != "type" &&
                std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return item.key() == a; })) {
                throw ValidationError(fmt::format("{}.{}: not valid for type \"{}\"", at, item.key(), type));
            }
        }
    };
    if (type == "state_impulse") {
        only({"time", "signal", "value", "mode"});
        StateImpulse e;
        e.time = number(je, "time", at, std::nullopt);
        e.index = signal_index(text(je, "signal", at, std::nullopt), num_sources, at + ".signal");
        e.magnitude = number(je, "value", at, std::nullopt);
        const std::string mode = text(je, "mode", at, "add");
        if (mode != "add" && mode != "set") {
            throw ValidationError(at + ".mode: expected \"add\" or \"set\"");
        }
        e.mode = mode == "add" ? StateImpulse::Mode::Add : StateImpulse::Mode::Set;
        return e;
    }
    if (type == "setpoint_fdi") {
        only({"start", "end", "target", "value"});
        SetpointFdi e;
        e.start = number(je, "start", at, std::nullopt);
        e.end = number(je, "end", at, std::nullopt);
        const std::string target = text(je, "target", at, std::nullopt);
        if (target != "v_b_star" && target != "d_l_star") {
            throw ValidationError(at + ".target: expected \"v_b_star\" or \"d_l_star\"");
        }
        e.target = target == "v_b_star" ? SetpointFdi::Target::VbStar : SetpointFdi::Target::DlStar;
        e.value = number(je, "value", at, std::nullopt);
        return e;
    }
    if (type == "sensor_fdi") {
        only({"start", "end", "signal", "bias"});
        SensorFdi e;
        e.start = number(je, "start", at, std::nullopt);
        e.end = number(je, "end", at, std::nullopt);
        e.index = signal_index(text(je, "signal", at, std::nullopt), num_sources, at + ".signal");
        e.bias = number(je, "bias", at, std::nullopt);
        return e;
    }
    if (type == "dos") {
        only({"start", "end", "subsystem"});
        DosFreeze e;
        e.start = number(je, "start", at, std::nullopt);
        e.end = number(je, "end", at, std::nullopt);
        const double sub = number(je, "subsystem", at, std::nullopt);
        if (sub < 1.0 || sub != std::floor(sub) || sub > static_cast<double>(num_sources + 1)) {
            throw ValidationError(fmt::format("{}.subsystem: expected an integer in [1, {}]", at, num_sources + 1));
        }
        e.subsystem = static_cast<std::size_t>(sub) - 1;
        return e;
    }
    throw ValidationError(at + ".type: expected state_impulse, setpoint_fdi, sensor_fdi or dos; got \"" + type +
                          "\"");
}

}  // namespace

const std::vector<SchemaField>& scenario_schema() {
    static const std::vector<SchemaField> fields = {
        {"params", "object", "", "required", "Circuit constants and setpoints."},
        {"params.sources", "array", "", "required", "One object per source converter, in index order."},
        {"params.sources[].C", "number", "F", "required", "Converter output capacitance C_j."},
        {"params.sources[].L", "number", "H", "required", "Line inductance L_j."},
        {"params.sources[].R", "number", "Ohm", "required", "Line resistance R_j."},
        {"params.sources[].L_s", "number", "H", "0", "Switched-circuit filter inductance (not used by the averaged model)."},
        {"params.sources[].r_s", "number", "Ohm", "0", "Switched-circuit filter resistance (not used)."},
        {"params.sources[].V_g", "number", "V", "0", "Source voltage of the switched circuit (not used)."},
        {"params.load", "object", "", "required", "Bus and load converter."},
        {"params.load.C_b", "number", "F", "required", "Bus capacitance."},
        {"params.load.R_l", "number|null", "Ohm", "required", "Resistive bus load; null means open circuit."},
        {"params.load.L_f", "number", "H", "required", "Load-converter filter inductance."},
        {"params.load.C_l", "number", "F", "0.00047", "Load-converter output capacitance."},
        {"params.load.r_l", "number", "Ohm", "required", "DC load resistance."},
        {"params.load.r_f", "number", "Ohm", "0", "Filter parasitic resistance (not used)."},
        {"params.v_b_star", "number", "V", "required", "Bus voltage setpoint, > 0."},
        {"params.d_l_star", "number", "1", "required", "Load duty-ratio setpoint in [0, 1]."},
        {"controller", "object", "", "{}", "Controller selection."},
        {"controller.kind", "string", "", "\"dscc\"", "\"dscc\", \"idapbc\" (nominal law only) or \"open-loop\" (holds u*)."},
        {"controller.clf_mode", "string", "", "\"relaxed\"",
         "\"relaxed\": CLF row with slack and gamma correction; \"exact\": hard CLF row, softened only when it "
         "conflicts with the barrier."},
        {"tuning", "object", "", "{}", "Gains; per-subsystem arrays have k entries, sources first."},
        {"tuning.alpha", "array", "", "[0.01, ..., 0.6]", "Nominal damping gains (sources: A/V; load: A^-1 scale)."},
        {"tuning.beta", "array", "1/s", "[0.1, ...]", "Barrier decay rates."},
        {"tuning.m", "array", "1", "[10, ...]", "Slack penalties."},
        {"tuning.clf_rate", "array", "W per unit^2", "[0.005, ..., 0.05]",
         "CLF margin rate on |x^_j|^2; checked against the admissible bound at load time."},
        {"tuning.lambda", "array", "", "R*/2", "Dissipation margin, one entry per state (2k+1)."},
        {"tuning.sample_period", "number", "s", "5e-05", "Controller sample period T_c; an integer multiple of dt."},
        {"tuning.eps_v", "number", "V", "0.5", "Bus voltage below which the load law holds d_l*."},
        {"limits", "object", "", "{}", "Safe intervals of the protected signals; null means unbounded."},
        {"limits.v_min", "number|array", "V", "20", "Lower source-voltage limits (a scalar applies to every source)."},
        {"limits.v_max", "number|array", "V", "36", "Upper source-voltage limits."},
        {"limits.i_f_min", "number|null", "A", "-10", "Lower filter-current limit."},
        {"limits.i_f_max", "number|null", "A", "120", "Upper filter-current limit."},
        {"initial_state", "object", "", "required", "Plant state at t = 0."},
        {"initial_state.v", "array", "V", "required", "Source voltages v_j."},
        {"initial_state.i_t", "array", "A", "required", "Line currents i_t_j."},
        {"initial_state.v_b", "number", "V", "required", "Bus voltage."},
        {"initial_state.i_f", "number", "A", "required", "Filter current."},
        {"initial_state.v_l", "number", "V", "required", "Load voltage."},
        {"events", "array", "", "[]", "Timed disturbances, ordered by start time."},
        {"events[].type", "string", "", "required", "\"state_impulse\", \"setpoint_fdi\", \"sensor_fdi\" or \"dos\"."},
        {"events[].time", "number", "s", "required", "state_impulse: application time."},
        {"events[].signal", "string", "", "required", "state_impulse, sensor_fdi: state name such as \"v_1\" or \"i_f\"."},
        {"events[].value", "number", "", "required",
         "state_impulse: added to (mode add) or replacing (mode set) the state; setpoint_fdi: spoofed setpoint."},
        {"events[].mode", "string", "", "\"add\"", "state_impulse: \"add\" or \"set\"."},
        {"events[].start", "number", "s", "required", "Window events: start of [start, end)."},
        {"events[].end", "number", "s", "required", "Window events: end of [start, end)."},
        {"events[].target", "string", "", "required", "setpoint_fdi: \"v_b_star\" or \"d_l_star\"."},
        {"events[].bias", "number", "", "required", "sensor_fdi: added to the controllers' reading."},
        {"events[].subsystem", "integer", "", "required", "dos: 1-based subsystem whose controller holds its output."},
        {"integration", "object", "", "{}", "Fixed-step RK4 settings."},
        {"integration.dt", "number", "s", "1e-06", "Integrator step."},
        {"integration.t_end", "number", "s", "0.5", "Simulated time; an integer multiple of the sample period."},
        {"integration.seed", "integer", "", "0", "Seed for randomized sweeps and checks."},
        {"output", "object", "", "{}", "Result files."},
        {"output.dir", "string", "", "\"\"", "Output directory (the CLI's --out takes precedence)."},
        {"output.summary_window", "number", "s", "0.001", "Trailing window of the steady-state means."},
        {"output.plots", "boolean", "", "true", "Write SVG plots next to trace.csv."},
    };
    return fields;
}

std::string scenario_schema_markdown() {
    std::ostringstream out;
    out << "# Scenario file reference\n\n"
        << "Generated by `dscc schema`. All quantities are plain SI numbers. Unknown keys are rejected.\n\n"
        << "| key | type | unit | default | description |\n|---|---|---|---|---|\n";
    for (const auto& f : scenario_schema()) {
        out << "| `" << f.path << "` | " << f.type << " | " << f.unit << " | " << f.default_value << " | "
            << f.description << " |\n";
    }
    return out.str();
}

Scenario scenario_from_json(const json& doc) {
    if (!doc.is_object()) {
        throw ValidationError("scenario: expected a JSON object");
    }
    for (const auto& item : doc.items()) {
        const bool known = std::any_of(scenario_schema().begin(), scenario_schema().end(),
                                       [&](const SchemaField& f) { return f.path == item.key(); });
        if (!known) {
            throw ValidationError(item.key() + ": unknown key");
        }
    }
    Scenario sc;
    sc.params = parse_params(doc);
    const std::size_t k = sc.params.k();
    const std::size_t ns = sc.params.num_sources();
    const ControllerConfig defaults = ControllerConfig::defaults(sc.params);

    const json empty = json::object();
    const json& jc = doc.contains("controller") ? doc.at("controller") : empty;
    check_keys(jc, "controller", "controller");
    sc.controller = controller_kind_from_string(text(jc, "kind", "controller", "dscc"));

    ControllerConfig& cfg = sc.cfg;
    cfg.clf_mode = clf_mode_from_string(text(jc, "clf_mode", "controller", "relaxed"));
    const json& jt = doc.contains("tuning") ? doc.at("tuning") : empty;
    check_keys(jt, "tuning", "tuning");
    cfg.alpha = numbers(jt, "alpha", "tuning", k, defaults.alpha);
    cfg.beta = numbers(jt, "beta", "tuning", k, defaults.beta);
    cfg.m = numbers(jt, "m", "tuning", k, defaults.m);
    cfg.clf_rate = numbers(jt, "clf_rate", "tuning", k, defaults.clf_rate);
    std::vector<double> half_r_star;
    for (std::size_t j = 0; j < k; ++j) {
        const Eigen::VectorXd r = closed_loop_dissipation(sc.params, cfg.alpha, j);
        for (Eigen::Index i = 0; i < r.size(); ++i) {
            half_r_star.push_back(0.5 * r[i]);
        }
    }
    cfg.lambda = numbers(jt, "lambda", "tuning", sc.params.state_dim(), half_r_star);
    cfg.sample_period = number(jt, "sample_period", "tuning", defaults.sample_period);
    cfg.eps_v = number(jt, "eps_v", "tuning", defaults.eps_v);

    const json& jl = doc.contains("limits") ? doc.at("limits") : empty;
    check_keys(jl, "limits", "limits");
    const auto v_min = numbers(jl, "v_min", "limits", ns, std::vector<double>(ns, defaults.v_limits[0].min), true, -kInf);
    const auto v_max = numbers(jl, "v_max", "limits", ns, std::vector<double>(ns, defaults.v_limits[0].max), true, kInf);
    cfg.v_limits.clear();
    for (std::size_t j = 0; j < ns; ++j) {
        cfg.v_limits.push_back({v_min[j], v_max[j]});
    }
    cfg.i_f_limits.min = number(jl, "i_f_min", "limits", defaults.i_f_limits.min, -kInf);
    cfg.i_f_limits.max = number(jl, "i_f_max", "limits", defaults.i_f_limits.max, kInf);

    if (!doc.contains("initial_state")) {
        throw ValidationError("initial_state: required");
    }
    const json& js = doc.at("initial_state");
    check_keys(js, "initial_state", "initial_state");
    for (const char* key : {"v", "i_t"}) {
        if (!js.contains(key)) {
            throw ValidationError(std::string("initial_state.") + key + ": required");
        }
    }
    const auto v = numbers(js, "v", "initial_state", ns, {});
    const auto i_t = numbers(js, "i_t", "initial_state", ns, {});
    SystemState x(ns);
    for (std::size_t j = 0; j < ns; ++j) {
        x[SystemState::v_index(j)] = v[j];
        x[SystemState::i_t_index(j)] = i_t[j];
    }
    x[x.v_b_index()] = number(js, "v_b", "initial_state", std::nullopt);
    x[x.i_f_index()] = number(js, "i_f", "initial_state", std::nullopt);
    x[x.v_l_index()] = number(js, "v_l", "initial_state", std::nullopt);
    sc.initial_state = x;

    if (doc.contains("events")) {
        const json& je = doc.at("events");
        if (!je.is_array()) {
            throw ValidationError("events: expected an array");
        }
        for (std::size_t i = 0; i < je.size(); ++i) {
            sc.events.push_back(parse_event(je[i], i, ns));
        }
    }

    const json& ji = doc.contains("integration") ? doc.at("integration") : empty;
    check_keys(ji, "integration", "integration");
    sc.dt = number(ji, "dt", "integration", 1e-6);
    sc.t_end = number(ji, "t_end", "integration", 0.5);
    if (ji.contains("seed")) {
        if (!ji.at("seed").is_number_unsigned()) {
            throw ValidationError("integration.seed: expected a non-negative integer");
        }
        sc.seed = ji.at("seed").get<std::uint64_t>();
    }

    const json& jo = doc.contains("output") ? doc.at("output") : empty;
    check_keys(jo, "output", "output");
    sc.output.dir = text(jo, "dir", "output", "");
    sc.output.summary_window = number(jo, "summary_window", "output", 1e-3);
    if (jo.contains("plots")) {
        if (!jo.at("plots").is_boolean()) {
            throw ValidationError("output.plots: expected true or false");
        }
        sc.output.plots = jo.at("plots").get<bool>();
    }

    sc.validate();
    return sc;
}

json scenario_to_json(const Scenario& sc) {
    json doc;
    json sources = json::array();
    for (const auto& s : sc.params.sources) {
        sources.push_back({{"C", s.C}, {"L", s.L}, {"R", s.R}, {"L_s", s.L_s}, {"r_s", s.r_s}, {"V_g", s.V_g}});
    }
    const auto& l = sc.params.load;
    doc["params"] = {{"sources", sources},
                     {"load",
                      {{"C_b", l.C_b},
                       {"R_l", finite_or_null(l.R_l)},
                       {"L_f", l.L_f},
                       {"C_l", l.C_l},
                       {"r_l", l.r_l},
                       {"r_f", l.r_f}}},
                     {"v_b_star", sc.params.v_b_star},
                     {"d_l_star", sc.params.d_l_star}};
    doc["controller"] = {{"kind", to_string(sc.controller)}, {"clf_mode", to_string(sc.cfg.clf_mode)}};
    const auto& c = sc.cfg;
    doc["tuning"] = {{"alpha", c.alpha},   {"beta", c.beta},
                     {"m", c.m},           {"clf_rate", c.clf_rate},
                     {"lambda", c.lambda}, {"sample_period", c.sample_period},
                     {"eps_v", c.eps_v}};
    json v_min = json::array();
    json v_max = json::array();
    for (const auto& lim : c.v_limits) {
        v_min.push_back(finite_or_null(lim.min));
        v_max.push_back(finite_or_null(lim.max));
    }
    doc["limits"] = {{"v_min", v_min},
                     {"v_max", v_max},
                     {"i_f_min", finite_or_null(c.i_f_limits.min)},
                     {"i_f_max", finite_or_null(c.i_f_limits.max)}};
    const SystemState& x = sc.initial_state;
    json v = json::array();
    json i_t = json::array();
    for (std::size_t j = 0; j < x.num_sources(); ++j) {
        v.push_back(x.v(j));
        i_t.push_back(x.i_t(j));
    }
    doc["initial_state"] = {{"v", v}, {"i_t", i_t}, {"v_b", x.v_b()}, {"i_f", x.i_f()}, {"v_l", x.v_l()}};

    const auto names = SystemState::names(sc.params.num_sources());
    json events = json::array();
    for (const auto& e : sc.events) {
        if (const auto* imp = std::get_if<StateImpulse>(&e)) {
            events.push_back({{"type", "state_impulse"},
                              {"time", imp->time},
                              {"signal", names.at(imp->index)},
                              {"value", imp->magnitude},
                              {"mode", imp->mode == StateImpulse::Mode::Add ? "add" : "set"}});
        } else if (const auto* fdi = std::get_if<SetpointFdi>(&e)) {
            events.push_back({{"type", "setpoint_fdi"},
                              {"start", fdi->start},
                              {"end", fdi->end},
                              {"target", fdi->target == SetpointFdi::Target::VbStar ? "v_b_star" : "d_l_star"},
                              {"value", fdi->value}});
        } else if (const auto* sf = std::get_if<SensorFdi>(&e)) {
            events.push_back({{"type", "sensor_fdi"},
                              {"start", sf->start},
                              {"end", sf->end},
                              {"signal", names.at(sf->index)},
                              {"bias", sf->bias}});
        } else if (const auto* dos = std::get_if<DosFreeze>(&e)) {
            events.push_back({{"type", "dos"}, {"start", dos->start}, {"end", dos->end}, {"subsystem", dos->subsystem + 1}});
        }
    }
    doc["events"] = events;
    doc["integration"] = {{"dt", sc.dt}, {"t_end", sc.t_end}, {"seed", sc.seed}};
    doc["output"] = {{"dir", sc.output.dir}, {"summary_window", sc.output.summary_window}, {"plots", sc.output.plots}};
    return doc;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError(path + ": cannot open file");
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(path + ": " + e.what());
    }
    return scenario_from_json(doc);
}

void save_scenario(const Scenario& scenario, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw ValidationError(path + ": cannot open file for writing");
    }
    out << scenario_to_json(scenario).dump(2) << '\n';
    if (!out) {
        throw ValidationError(path + ": write failed");
    }
}

}  // namespace dscc
