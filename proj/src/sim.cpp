#include "dscc/sim.hpp"

#include "dscc/safety.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace dscc {
namespace {

constexpr double kDivergenceBound = 1e6;

bool window_active(double start, double end, double t) { return t >= start && t < end; }

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Equilibrium spoofed_equilibrium(MicrogridParams params, const SetpointFdi& fdi) {
    if (fdi.target == SetpointFdi::Target::VbStar) {
        params.v_b_star = fdi.value;
    } else {
        params.d_l_star = fdi.value;
    }
    return solve_dispatch(params);
}

void rk4_step(const MicrogridParams& p, const ControlInput& u, double dt, Eigen::VectorXd& x, Eigen::VectorXd& k1,
              Eigen::VectorXd& k2, Eigen::VectorXd& k3, Eigen::VectorXd& k4, Eigen::VectorXd& tmp) {
    global_rhs_into(p, x, u, k1);
    tmp = x + 0.5 * dt * k1;
    global_rhs_into(p, tmp, u, k2);
    tmp = x + 0.5 * dt * k2;
    global_rhs_into(p, tmp, u, k3);
    tmp = x + dt * k3;
    global_rhs_into(p, tmp, u, k4);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

std::size_t protected_index(const SystemState& s, std::size_t j) {
    return j < s.num_sources() ? SystemState::v_index(j) : s.i_f_index();
}

}  // namespace

double event_start(const Event& e) {
    return std::visit(Overloaded{[](const StateImpulse& x) { return x.time; },
                                 [](const auto& x) { return x.start; }},
                      e);
}

const char* to_string(RunStatus status) {
    switch (status) {
        case RunStatus::Ok:
            return "ok";
        case RunStatus::Diverged:
            return "diverged";
        case RunStatus::EjectedFromSafeSet:
            return "ejected-from-safe-set";
    }
    return "?";
}

void Scenario::validate() const {
    params.validate();
    cfg.validate(params);
    if (initial_state.num_sources() != params.num_sources() || initial_state.size() != params.state_dim()) {
        throw ValidationError(fmt::format("initial_state: expected {} entries", params.state_dim()));
    }
    if (!initial_state.all_finite()) {
        throw ValidationError("initial_state: entries must be finite");
    }
    if (!(std::isfinite(dt) && dt > 0.0)) {
        throw ValidationError("integration.dt must be > 0");
    }
    if (!(std::isfinite(t_end) && t_end > 0.0)) {
        throw ValidationError("integration.t_end must be > 0");
    }
    if (cfg.sample_period < dt) {
        throw ValidationError("tuning.sample_period must be >= integration.dt");
    }
    const double ratio = cfg.sample_period / dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio) {
        throw ValidationError("tuning.sample_period must be an integer multiple of integration.dt");
    }
    const double steps = t_end / cfg.sample_period;
    if (std::abs(steps - std::round(steps)) > 1e-9 * steps) {
        throw ValidationError("integration.t_end must be an integer multiple of tuning.sample_period");
    }
    if (!(std::isfinite(output.summary_window) && output.summary_window > 0.0)) {
        throw ValidationError("output.summary_window must be > 0");
    }
    double previous = -INFINITY;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const std::string where = fmt::format("events[{}]", i);
        const double start = event_start(events[i]);
        if (!std::isfinite(start) || start < 0.0) {
            throw ValidationError(where + ": time must be finite and >= 0");
        }
        if (start < previous) {
            throw ValidationError(where + ": events must be ordered by start time");
        }
        previous = start;
        std::visit(Overloaded{
                       [&](const StateImpulse& e) {
                           if (e.index >= params.state_dim() || !std::isfinite(e.magnitude)) {
                               throw ValidationError(where + ": index out of range or non-finite magnitude");
                           }
                       },
                       [&](const SetpointFdi& e) {
                           if (!(e.end > e.start) || !std::isfinite(e.value)) {
                               throw ValidationError(where + ": need end > start and a finite value");
                           }
                           MicrogridParams spoofed = params;
                           (e.target == SetpointFdi::Target::VbStar ? spoofed.v_b_star : spoofed.d_l_star) = e.value;
                           spoofed.validate();
                       },
                       [&](const SensorFdi& e) {
                           if (!(e.end > e.start) || e.index >= params.state_dim() || !std::isfinite(e.bias)) {
                               throw ValidationError(where + ": need end > start, a valid index and finite bias");
                           }
                       },
                       [&](const DosFreeze& e) {
                           if (!(e.end > e.start) || e.subsystem >= params.k()) {
                               throw ValidationError(where + ": need end > start and a valid subsystem");
                           }
                       },
                   },
                   events[i]);
    }
}

std::size_t Scenario::substeps() const {
    return static_cast<std::size_t>(std::llround(cfg.sample_period / dt));
}

Scenario Scenario::table3() {
    Scenario s;
    s.params = MicrogridParams::table3();
    s.cfg = ControllerConfig::defaults(s.params);
    Eigen::VectorXd x(7);
    x << 23.0, 15.0, 30.0, 12.0, 1.0, 1.0, 9.0;
    s.initial_state = SystemState(2, x);
    return s;
}

SimResult run(const Scenario& sc) {
    sc.validate();
    const MicrogridParams& p = sc.params;
    const ControllerConfig& cfg = sc.cfg;
    const std::size_t k = p.k();
    const std::size_t ns = p.num_sources();
    const std::size_t nsub = sc.substeps();
    const double Tc = cfg.sample_period;
    const auto steps = static_cast<std::size_t>(std::llround(sc.t_end / Tc));

    SimResult result;
    const Equilibrium eq = solve_dispatch(p);
    result.equilibrium = eq;

    std::vector<std::optional<Equilibrium>> spoofed(sc.events.size());
    for (std::size_t i = 0; i < sc.events.size(); ++i) {
        if (const auto* fdi = std::get_if<SetpointFdi>(&sc.events[i])) {
            spoofed[i] = spoofed_equilibrium(p, *fdi);
        }
    }

    SystemState x = sc.initial_state;
    NominalControllerState ctrl = NominalControllerState::capture(eq, x, 0.0);
    std::vector<bool> impulse_done(sc.events.size(), false);
    std::vector<bool> was_frozen(k, false);
    bool impulse_since_record = false;

    auto apply_impulses = [&](double t_now) {
        for (std::size_t i = 0; i < sc.events.size(); ++i) {
            const auto* imp = std::get_if<StateImpulse>(&sc.events[i]);
            if (imp == nullptr || impulse_done[i] || imp->time > t_now + 0.5 * sc.dt) {
                continue;
            }
            if (imp->mode == StateImpulse::Mode::Add) {
                x[imp->index] += imp->magnitude;
            } else {
                x[imp->index] = imp->magnitude;
            }
            impulse_done[i] = true;
            impulse_since_record = true;
        }
    };

    TraceRecord held;  // last record, source of held (DoS) outputs
    held.u_nominal.assign(k, 0.0);
    held.u_command = held.u_nominal;
    held.delta.assign(k, 0.0);
    held.active_set.assign(k, kActiveNone);
    for (std::size_t j = 0; j < k; ++j) {
        held.u_command[j] = held.u_nominal[j] = eq.input_component(j);
    }

    ControlInput applied;
    applied.i_s.assign(ns, 0.0);
    const auto n = static_cast<Eigen::Index>(p.state_dim());
    Eigen::VectorXd k1(n), k2(n), k3(n), k4(n), tmp(n);
    result.trace.reserve(steps + 1);

    for (std::size_t step = 0; step <= steps; ++step) {
        const double t = static_cast<double>(step) * Tc;
        apply_impulses(t);

        TraceRecord rec;
        rec.t = t;
        rec.x = x.values();
        rec.H_j.assign(k, 0.0);
        rec.B_j.assign(k, 0.0);
        if (impulse_since_record) {
            rec.flags |= kFlagEventActive;
            impulse_since_record = false;
        }

        if (!x.all_finite() || x.values().cwiseAbs().maxCoeff() > kDivergenceBound) {
            rec.flags |= kFlagDiverged;
            rec.H = rec.Hdot = NAN;
            rec.u_nominal = rec.u_command = rec.u_applied = held.u_command;
            rec.delta = held.delta;
            rec.active_set = held.active_set;
            result.status = RunStatus::Diverged;
            result.message = fmt::format("state diverged at t = {:.6g} s", t);
            result.trace.push_back(std::move(rec));
            break;
        }

        // Barrier values and the safe-set check use the true plant state.
        bool outside = false;
        std::size_t outside_j = 0;
        for (std::size_t j = 0; j < k; ++j) {
            const Interval& lim = cfg.limits(j);
            const double s = x[protected_index(x, j)];
            if (!lim.strictly_contains(s)) {
                rec.B_j[j] = NAN;
                rec.flags |= kFlagBoundary;
                if (!outside) {
                    outside = true;
                    outside_j = j;
                }
            } else if (std::isfinite(lim.min) && std::isfinite(lim.max)) {
                rec.B_j[j] = reciprocal_barrier(s, lim);
            }
            rec.H_j[j] = clf_terms(p, cfg, eq, j, x.subsystem(j)).H;
        }
        rec.H = global_clf(p, eq, x);

        if (outside && sc.controller == ControllerKind::Dscc) {
            const SafeSetViolation why(outside_j, x[protected_index(x, outside_j)], cfg.limits(outside_j));
            rec.u_nominal = rec.u_command = rec.u_applied = held.u_command;
            rec.delta = held.delta;
            rec.active_set = held.active_set;
            rec.Hdot = NAN;
            result.status = RunStatus::EjectedFromSafeSet;
            result.message = fmt::format("t = {:.6g} s: {}", t, why.what());
            result.trace.push_back(std::move(rec));
            break;
        }

        // What the controllers see.
        const Equilibrium* ctrl_eq = &eq;
        SystemState measured = x;
        std::vector<bool> frozen(k, false);
        for (std::size_t i = 0; i < sc.events.size(); ++i) {
            const Event& e = sc.events[i];
            if (const auto* fdi = std::get_if<SetpointFdi>(&e); fdi && window_active(fdi->start, fdi->end, t)) {
                ctrl_eq = &*spoofed[i];
                rec.flags |= kFlagEventActive;
            } else if (const auto* sf = std::get_if<SensorFdi>(&e); sf && window_active(sf->start, sf->end, t)) {
                measured[sf->index] += sf->bias;
                rec.flags |= kFlagEventActive;
            } else if (const auto* dos = std::get_if<DosFreeze>(&e); dos && window_active(dos->start, dos->end, t)) {
                frozen[dos->subsystem] = true;
                rec.flags |= kFlagEventActive;
            }
        }

        rec.u_nominal = held.u_nominal;
        rec.u_command = held.u_command;
        rec.delta.assign(k, 0.0);
        rec.active_set.assign(k, kActiveNone);
        for (std::size_t j = 0; j < k; ++j) {
            if (frozen[j] && step > 0) {
                rec.delta[j] = held.delta[j];
                rec.active_set[j] = held.active_set[j];
                was_frozen[j] = true;
                continue;
            }
            if (was_frozen[j] && j < ns) {
                ctrl.recapture(j, measured.i_t(j), *ctrl_eq, t);
                rec.flags |= kFlagFfRecaptured;
            }
            was_frozen[j] = false;
            const Eigen::VectorXd x_j = measured.subsystem(j);
            switch (sc.controller) {
                case ControllerKind::Dscc:
                    try {
                        const SubsystemStep s = dscc_step(p, cfg, *ctrl_eq, ctrl, j, x_j, t);
                        rec.u_nominal[j] = s.u_nominal;
                        rec.u_command[j] = s.u;
                        rec.delta[j] = s.qp.delta;
                        rec.active_set[j] = s.qp.active_set;
                        rec.flags |= s.flags;
                    } catch (const SafeSetViolation&) {
                        // Only the measurement is outside (sensor FDI): hold the last output.
                        rec.flags |= kFlagBoundary | kFlagQpFault;
                    }
                    break;
                case ControllerKind::IdaPbc:
                    rec.u_nominal[j] = rec.u_command[j] = nominal_step(p, cfg, *ctrl_eq, ctrl, j, x_j, t);
                    break;
                case ControllerKind::OpenLoop:
                    rec.u_nominal[j] = rec.u_command[j] = ctrl_eq->input_component(j);
                    break;
            }
        }

        rec.u_applied = rec.u_command;
        const ClampedDuty duty = clamp_duty(rec.u_command.back());
        rec.u_applied.back() = duty.value;
        if (duty.clamped) {
            rec.flags |= kFlagClamp;
        }
        for (std::size_t j = 0; j < ns; ++j) {
            applied.i_s[j] = rec.u_applied[j];
        }
        applied.d_l = duty.value;
        rec.Hdot = global_clf_rate(p, eq, x, applied);

        held = rec;
        result.trace.push_back(std::move(rec));
        if (step == steps) {
            break;
        }
        for (std::size_t s = 0; s < nsub; ++s) {
            if (s > 0) {
                apply_impulses(t + static_cast<double>(s) * sc.dt);
            }
            rk4_step(p, applied, sc.dt, x.values(), k1, k2, k3, k4, tmp);
        }
    }
    return result;
}

std::vector<SignalStats> steady_state_summary(const std::vector<TraceRecord>& trace, double window,
                                              std::size_t num_sources) {
    if (trace.empty()) {
        throw ValidationError("steady_state_summary: empty trace");
    }
    if (!(window > 0.0)) {
        throw ValidationError("steady_state_summary: window must be > 0");
    }
    const double span = trace.back().t - trace.front().t;
    if (span < window) {
        throw ValidationError(fmt::format("steady_state_summary: trace spans {:g} s, shorter than the {:g} s window",
                                          span, window));
    }
    std::vector<std::string> names = SystemState::names(num_sources);
    const std::size_t n_state = names.size();
    for (std::size_t j = 0; j < num_sources; ++j) {
        names.push_back(fmt::format("i_s_{}", j + 1));
    }
    names.push_back("d_l");
    names.push_back("H");

    auto value = [&](const TraceRecord& r, std::size_t c) {
        if (c < n_state) {
            return r.x[static_cast<Eigen::Index>(c)];
        }
        if (c < n_state + num_sources + 1) {
            return r.u_applied[c - n_state];
        }
        return r.H;
    };

    const double cutoff = trace.back().t - window;
    std::vector<SignalStats> out;
    for (std::size_t c = 0; c < names.size(); ++c) {
        SignalStats s;
        s.name = names[c];
        s.min = INFINITY;
        s.max = -INFINITY;
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& r : trace) {
            const double v = value(r, c);
            s.min = std::min(s.min, v);
            s.max = std::max(s.max, v);
            if (r.t > cutoff) {
                sum += v;
                ++count;
            }
        }
        s.mean = sum / static_cast<double>(count);
        out.push_back(std::move(s));
    }
    return out;
}

SafetyVerdict safety_verdict(const std::vector<TraceRecord>& trace, const ControllerConfig& cfg,
                             std::size_t num_sources) {
    SafetyVerdict verdict;
    const auto names = SystemState::names(num_sources);
    for (const auto& r : trace) {
        for (std::size_t j = 0; j <= num_sources; ++j) {
            const std::size_t idx = j < num_sources ? SystemState::v_index(j) : 2 * num_sources + 1;
            const double s = r.x[static_cast<Eigen::Index>(idx)];
            const Interval& lim = cfg.limits(j);
            if (!lim.contains(s)) {
                verdict.pass = false;
                verdict.first = SafetyViolation{r.t, names[idx], s, lim};
                return verdict;
            }
        }
    }
    return verdict;
}

std::optional<double> settling_time(const std::vector<TraceRecord>& trace, std::size_t index, double target,
                                    double band) {
    const double tol = band * std::max(std::abs(target), 1.0);
    std::optional<double> settled;
    for (const auto& r : trace) {
        const double v = r.x[static_cast<Eigen::Index>(index)];
        const bool inside = std::abs(v - target) <= tol;
        if (!inside) {
            settled.reset();
        } else if (!settled) {
            settled = r.t;
        }
    }
    return settled;
}

}  // namespace dscc
