#pragma once

// Fixed-step closed-loop simulation: classical RK4 on the averaged model,
// zero-order-hold control at the controller sample period, timed
// disturbance and attack events.

#include "dscc/controller.hpp"
#include "dscc/equilibrium.hpp"
#include "dscc/model.hpp"
#include "dscc/nominal.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace dscc {

/// Instantaneous change of one plant state at `time`.
struct StateImpulse {
    enum class Mode { Add, Set };
    double time = 0.0;
    std::size_t index = 0;  ///< SystemState index
    double magnitude = 0.0;
    Mode mode = Mode::Add;

    bool operator==(const StateImpulse&) const = default;
};

/// Controllers see a spoofed setpoint during [start, end); the plant is unaffected.
struct SetpointFdi {
    enum class Target { VbStar, DlStar };
    double start = 0.0;
    double end = 0.0;
    Target target = Target::VbStar;
    double value = 0.0;

    bool operator==(const SetpointFdi&) const = default;
};

/// Controllers read state[index] + bias during [start, end).
struct SensorFdi {
    double start = 0.0;
    double end = 0.0;
    std::size_t index = 0;
    double bias = 0.0;

    bool operator==(const SensorFdi&) const = default;
};

/// Subsystem's controller holds its last output during [start, end).
struct DosFreeze {
    double start = 0.0;
    double end = 0.0;
    std::size_t subsystem = 0;

    bool operator==(const DosFreeze&) const = default;
};

using Event = std::variant<StateImpulse, SetpointFdi, SensorFdi, DosFreeze>;

double event_start(const Event& e);

struct OutputOptions {
    std::string dir;              ///< empty: the CLI's --out or "out"
    double summary_window = 1e-3; ///< trailing window for steady-state means [s]
    bool plots = true;

    bool operator==(const OutputOptions&) const = default;
};

struct Scenario {
    MicrogridParams params;
    ControllerConfig cfg;
    ControllerKind controller = ControllerKind::Dscc;
    SystemState initial_state;
    double t_end = 0.5;
    double dt = 1e-6;
    std::vector<Event> events;
    std::uint64_t seed = 0;
    OutputOptions output;

    /// Throws ValidationError; also validates params and cfg.
    void validate() const;
    /// Integrator steps per controller sample.
    std::size_t substeps() const;

    /// Reference circuit, default tuning, reference initial state, 0.5 s.
    static Scenario table3();

    bool operator==(const Scenario&) const = default;
};

/// One row per controller sample; the control is the one held until the next sample.
struct TraceRecord {
    double t = 0.0;
    Eigen::VectorXd x;
    std::vector<double> u_nominal;  ///< per subsystem
    std::vector<double> u_command;  ///< before duty clamping
    std::vector<double> u_applied;
    std::vector<double> H_j;
    std::vector<double> B_j;  ///< NaN when the protected scalar is outside its limits
    std::vector<double> delta;
    std::vector<unsigned> active_set;
    double H = 0.0;
    double Hdot = 0.0;  ///< instantaneous dH/dt under the applied input
    unsigned flags = 0;
};

enum class RunStatus { Ok, Diverged, EjectedFromSafeSet };

const char* to_string(RunStatus status);

struct SimResult {
    std::vector<TraceRecord> trace;
    RunStatus status = RunStatus::Ok;
    std::string message;
    Equilibrium equilibrium;
};

SimResult run(const Scenario& scenario);

struct SignalStats {
    std::string name;
    double mean = 0.0;  ///< over the trailing window
    double min = 0.0;   ///< over the whole trace
    double max = 0.0;
};

/// Means over records with t > t_last - window; extrema over every record.
/// Covers every state and applied-input column plus H.
std::vector<SignalStats> steady_state_summary(const std::vector<TraceRecord>& trace, double window,
                                              std::size_t num_sources);

struct SafetyViolation {
    double t = 0.0;
    std::string signal;
    double value = 0.0;
    Interval limits;
};

struct SafetyVerdict {
    bool pass = true;
    std::optional<SafetyViolation> first;
};

/// Pass iff every record keeps each v_j and i_f inside its closed interval.
SafetyVerdict safety_verdict(const std::vector<TraceRecord>& trace, const ControllerConfig& cfg,
                             std::size_t num_sources);

/// Earliest time after which the column stays within `band` * max(|target|, 1)
/// of `target`; nullopt if the last record is outside.
std::optional<double> settling_time(const std::vector<TraceRecord>& trace, std::size_t index, double target,
                                    double band = 0.01);

}  // namespace dscc
