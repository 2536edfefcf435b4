#include "dscc/sim.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

using namespace dscc;
using Catch::Approx;

namespace {

Scenario short_run(double t_end = 0.02) {
    Scenario sc = Scenario::table3();
    sc.t_end = t_end;
    return sc;
}

const SignalStats& stat(const std::vector<SignalStats>& s, const std::string& name) {
    for (const auto& x : s) {
        if (x.name == name) {
            return x;
        }
    }
    FAIL("no column " << name);
    return s.front();
}

TraceRecord record(double t, std::size_t ns, double value) {
    TraceRecord r;
    r.t = t;
    r.x = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(2 * ns + 3), value);
    r.u_applied.assign(ns + 1, value);
    r.H = value;
    return r;
}

}  // namespace

TEST_CASE("trace has one record per sample including both ends", "[sim]") {
    const auto sc = short_run(0.01);
    const auto res = run(sc);
    REQUIRE(res.status == RunStatus::Ok);
    REQUIRE(res.trace.size() == 201);
    CHECK(res.trace.front().t == 0.0);
    CHECK(res.trace.back().t == Approx(0.01).epsilon(1e-12));
    CHECK(res.trace.front().x == sc.initial_state.values());
}

TEST_CASE("the equilibrium is invariant under every controller", "[sim]") {
    for (auto kind : {ControllerKind::Dscc, ControllerKind::IdaPbc, ControllerKind::OpenLoop}) {
        auto sc = short_run(0.01);
        sc.controller = kind;
        const auto eq = solve_dispatch(sc.params);
        sc.initial_state = eq.state();
        const auto res = run(sc);
        REQUIRE(res.status == RunStatus::Ok);
        const Eigen::VectorXd err = res.trace.back().x - eq.state().values();
        CHECK(err.cwiseAbs().maxCoeff() <= 1e-9 * eq.state().values().cwiseAbs().maxCoeff());
        CHECK(res.trace.back().H <= 1e-18);
    }
}

TEST_CASE("DSCC run converges to the dispatch equilibrium and stays safe", "[sim]") {
    const auto sc = Scenario::table3();
    const auto res = run(sc);
    REQUIRE(res.status == RunStatus::Ok);
    CHECK(safety_verdict(res.trace, sc.cfg, 2).pass);
    const auto s = steady_state_summary(res.trace, 1e-3, 2);
    CHECK(stat(s, "v_b").mean == Approx(32.0).epsilon(1e-4));
    CHECK(stat(s, "i_f").mean == Approx(res.equilibrium.i_f_star).epsilon(1e-4));
    CHECK(stat(s, "v_l").mean == Approx(16.0).epsilon(1e-4));
    CHECK(res.trace.back().H < 1e-6 * res.trace.front().H);
    for (const auto& r : res.trace) {
        for (double b : r.B_j) {
            CHECK(std::isfinite(b));
        }
    }
}

TEST_CASE("halving the integration step barely moves the final state", "[sim]") {
    auto a = short_run(0.05);
    auto b = a;
    b.dt = a.dt / 2;
    const auto ra = run(a);
    const auto rb = run(b);
    REQUIRE(ra.trace.size() == rb.trace.size());
    const Eigen::VectorXd d = ra.trace.back().x - rb.trace.back().x;
    CHECK(d.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("identical scenarios give identical traces", "[sim]") {
    const auto sc = short_run(0.01);
    const auto a = run(sc);
    const auto b = run(sc);
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        CHECK(a.trace[i].x == b.trace[i].x);
        CHECK(a.trace[i].u_applied == b.trace[i].u_applied);
    }
}

TEST_CASE("nominal controller alone violates the voltage limits", "[sim]") {
    auto sc = short_run(0.05);
    sc.controller = ControllerKind::IdaPbc;
    const auto res = run(sc);
    CHECK(res.status == RunStatus::Ok);
    const auto v = safety_verdict(res.trace, sc.cfg, 2);
    CHECK_FALSE(v.pass);
    REQUIRE(v.first.has_value());
    CHECK((v.first->signal == "v_1" || v.first->signal == "v_2"));
}

TEST_CASE("a state impulse is applied at its time", "[sim][events]") {
    auto sc = short_run(0.01);
    sc.events.push_back(StateImpulse{.time = 0.005, .index = 0, .magnitude = 35.5, .mode = StateImpulse::Mode::Set});
    const auto res = run(sc);
    REQUIRE(res.status == RunStatus::Ok);
    const auto& r = res.trace[100];
    CHECK(r.t == Approx(0.005));
    CHECK(r.x[0] == 35.5);
    CHECK((r.flags & kFlagEventActive) != 0u);
    CHECK(safety_verdict(res.trace, sc.cfg, 2).pass);

    auto add = short_run(0.01);
    add.events.push_back(StateImpulse{.time = 0.0, .index = 6, .magnitude = 1.0});
    CHECK(run(add).trace.front().x[6] == Approx(sc.initial_state[6] + 1.0));
}

TEST_CASE("an impulse that leaves the safe set ends a DSCC run", "[sim][events]") {
    auto sc = short_run(0.01);
    sc.events.push_back(StateImpulse{.time = 0.005, .index = 2, .magnitude = 37.0, .mode = StateImpulse::Mode::Set});
    const auto res = run(sc);
    CHECK(res.status == RunStatus::EjectedFromSafeSet);
    CHECK(res.trace.back().t == Approx(0.005));
    CHECK_FALSE(res.message.empty());
}

TEST_CASE("sampled-data instability is reported as divergence", "[sim]") {
    auto sc = short_run(0.05);
    sc.controller = ControllerKind::IdaPbc;
    sc.cfg.alpha[0] = sc.cfg.alpha[1] = 1e3;  // alpha T_c / C >> 2
    const auto res = run(sc);
    CHECK(res.status == RunStatus::Diverged);
    CHECK((res.trace.back().flags & kFlagDiverged) != 0u);
}

TEST_CASE("DoS holds the last output and re-captures the feedforward on resume", "[sim][events]") {
    auto sc = short_run(0.01);
    sc.events.push_back(DosFreeze{.start = 0.002, .end = 0.004, .subsystem = 0});
    const auto res = run(sc);
    const double held = res.trace[39].u_applied[0];
    for (std::size_t i = 40; i < 80; ++i) {
        CHECK(res.trace[i].u_applied[0] == held);
        CHECK((res.trace[i].flags & kFlagEventActive) != 0u);
    }
    CHECK((res.trace[80].flags & kFlagFfRecaptured) != 0u);
    CHECK(res.trace[80].u_applied[0] != held);
}

TEST_CASE("sensor FDI reaches the controllers only", "[sim][events]") {
    auto clean = short_run(0.01);
    clean.controller = ControllerKind::OpenLoop;
    auto attacked = clean;
    attacked.events.push_back(SensorFdi{.start = 0.002, .end = 0.006, .index = 0, .bias = 3.0});
    const auto a = run(clean);
    const auto b = run(attacked);
    CHECK(a.trace.back().x == b.trace.back().x);

    clean.controller = attacked.controller = ControllerKind::Dscc;
    const auto c = run(clean);
    const auto d = run(attacked);
    CHECK(c.trace[60].x != d.trace[60].x);
    CHECK((d.trace[60].flags & kFlagEventActive) != 0u);
}

TEST_CASE("setpoint FDI drags the bus toward the spoofed value", "[sim][events]") {
    auto sc = Scenario::table3();
    sc.t_end = 0.3;
    sc.events.push_back(SetpointFdi{.start = 0.1, .end = 0.3, .target = SetpointFdi::Target::VbStar, .value = 30.0});
    const auto res = run(sc);
    REQUIRE(res.status == RunStatus::Ok);
    const auto s = steady_state_summary(res.trace, 1e-3, 2);
    CHECK(stat(s, "v_b").mean == Approx(30.0).epsilon(1e-3));
}

TEST_CASE("scenario validation", "[sim]") {
    auto sc = short_run();
    sc.dt = 3e-6;  // 50 us is not a multiple
    CHECK_THROWS_AS(sc.validate(), ValidationError);
    sc = short_run();
    sc.t_end = 0.01001;
    CHECK_THROWS_AS(sc.validate(), ValidationError);
    sc = short_run();
    sc.events.push_back(StateImpulse{.time = 0.01});
    sc.events.push_back(StateImpulse{.time = 0.005});
    CHECK_THROWS_AS(sc.validate(), ValidationError);
    sc = short_run();
    sc.events.push_back(DosFreeze{.start = 0.005, .end = 0.004, .subsystem = 0});
    CHECK_THROWS_AS(sc.validate(), ValidationError);
    sc = short_run();
    sc.initial_state = SystemState(3);
    CHECK_THROWS_AS(sc.validate(), ValidationError);
    CHECK_NOTHROW(short_run().validate());
}

TEST_CASE("steady-state summary", "[sim][summary]") {
    CHECK_THROWS_AS(steady_state_summary({}, 1e-3, 2), ValidationError);

    std::vector<TraceRecord> flat;
    for (int i = 0; i <= 100; ++i) {
        flat.push_back(record(i * 1e-4, 2, 4.25));
    }
    for (const auto& s : steady_state_summary(flat, 1e-3, 2)) {
        CHECK(s.mean == 4.25);
        CHECK(s.min == 4.25);
        CHECK(s.max == 4.25);
    }
    CHECK_THROWS_AS(steady_state_summary(flat, 0.1, 2), ValidationError);

    // Ten samples per period over four periods: the window mean is exact.
    std::vector<TraceRecord> wave;
    const double period = 1e-3;
    for (int i = 0; i <= 80; ++i) {
        const double t = i * period / 10;
        wave.push_back(record(t, 2, 7.0 + 2.0 * std::sin(2 * std::numbers::pi * t / period)));
    }
    const auto s = steady_state_summary(wave, 4 * period, 2);
    CHECK(stat(s, "v_b").mean == Approx(7.0).epsilon(1e-12));
    CHECK(stat(s, "H").max == Approx(7.0 + 2.0 * std::sin(2 * std::numbers::pi * 0.2)).epsilon(1e-12));
}

TEST_CASE("safety verdict uses closed intervals", "[sim][summary]") {
    const auto cfg = ControllerConfig::defaults(MicrogridParams::table3());
    std::vector<TraceRecord> tr{record(0.0, 2, 30.0)};
    tr[0].x[5] = 50.0;  // i_f inside [-10, 120]
    CHECK(safety_verdict(tr, cfg, 2).pass);
    tr[0].x[0] = 36.0;
    CHECK(safety_verdict(tr, cfg, 2).pass);
    tr.push_back(tr[0]);
    tr[1].t = 1e-3;
    tr[1].x[2] = 19.5;
    const auto v = safety_verdict(tr, cfg, 2);
    CHECK_FALSE(v.pass);
    REQUIRE(v.first);
    CHECK(v.first->signal == "v_2");
    CHECK(v.first->t == 1e-3);
    CHECK(v.first->value == 19.5);
}

TEST_CASE("settling time", "[sim][summary]") {
    std::vector<TraceRecord> tr;
    for (int i = 0; i <= 100; ++i) {
        tr.push_back(record(i * 1e-3, 2, 10.0 * std::exp(-i * 0.1) + 32.0));
    }
    // 10 e^{-0.1 i} <= 0.32  <=>  i >= 34.4
    const auto t = settling_time(tr, 4, 32.0, 0.01);
    REQUIRE(t);
    CHECK(*t == Approx(0.035));
    CHECK_FALSE(settling_time(tr, 4, 50.0));
}

TEST_CASE("a measurement pushed outside the limits freezes that controller", "[sim][events]") {
    auto sc = short_run(0.01);
    sc.initial_state = solve_dispatch(sc.params).state();
    sc.events.push_back(SensorFdi{.start = 0.002, .end = 0.004, .index = 0, .bias = 10.0});
    const auto res = run(sc);
    REQUIRE(res.status == RunStatus::Ok);
    const auto& r = res.trace[50];
    CHECK((r.flags & kFlagBoundary) != 0u);
    CHECK((r.flags & kFlagQpFault) != 0u);
    CHECK(r.u_applied[0] == res.trace[39].u_applied[0]);
    CHECK(safety_verdict(res.trace, sc.cfg, 2).pass);
}
