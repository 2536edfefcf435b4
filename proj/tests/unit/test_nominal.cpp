#include "dscc/equilibrium.hpp"
#include "dscc/nominal.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace dscc;
using Catch::Approx;

namespace {

struct Fixture {
    MicrogridParams p = MicrogridParams::table3();
    ControllerConfig cfg = ControllerConfig::defaults(p);
    Equilibrium eq = solve_dispatch(p);
};

}  // namespace

TEST_CASE("source law is a fixed point at the equilibrium", "[nominal]") {
    Fixture f;
    const auto st = NominalControllerState::capture(f.eq, f.eq.state(), 0.0);
    for (std::size_t j = 0; j < 2; ++j) {
        CHECK(nominal_source(f.p, f.cfg, f.eq, st, j, f.eq.v_star[j], 0.0) == f.eq.i_s_star[j]);
        CHECK(nominal_source(f.p, f.cfg, f.eq, st, j, f.eq.v_star[j], 1.0) == f.eq.i_s_star[j]);
    }
}

TEST_CASE("source law at start and after three time constants", "[nominal]") {
    Fixture f;
    SystemState x = f.eq.state();
    x[SystemState::i_t_index(0)] = 15.0;
    const auto st = NominalControllerState::capture(f.eq, x, 0.2);
    const double ih0 = 15.0 - f.eq.i_t_star[0];
    CHECK(nominal_source(f.p, f.cfg, f.eq, st, 0, 23.0, 0.2) ==
          Approx(f.eq.i_s_star[0] - 0.01 * (23.0 - f.eq.v_star[0]) + ih0).epsilon(1e-15));

    const auto& s = f.p.sources[0];
    const double t = 0.2 + 3.0 * s.L / s.R;
    // -15.0131... * e^-3 and the total, both evaluated independently.
    CHECK(st.feedforward(f.p, 0, t) == Approx(-0.747459685058893901).epsilon(1e-12));
    CHECK(nominal_source(f.p, f.cfg, f.eq, st, 0, 23.0, t) == Approx(29.3613058834312593).epsilon(1e-12));
}

TEST_CASE("feedforward halves after L/R ln 2 and can be re-captured", "[nominal]") {
    Fixture f;
    SystemState x = f.eq.state();
    x[SystemState::i_t_index(1)] = 2.0;
    auto st = NominalControllerState::capture(f.eq, x, 0.0);
    const auto& s = f.p.sources[1];
    const double half = s.L / s.R * std::log(2.0);
    CHECK(st.feedforward(f.p, 1, half) == Approx(0.5 * st.feedforward(f.p, 1, 0.0)).epsilon(1e-12));

    st.recapture(1, f.eq.i_t_star[1] + 4.0, f.eq, 0.3);
    CHECK(st.start_time(1) == 0.3);
    CHECK(st.feedforward(f.p, 1, 0.3) == Approx(4.0).epsilon(1e-12));
    CHECK(st.start_time(0) == 0.0);
}

TEST_CASE("source law requires an initialized controller state", "[nominal]") {
    Fixture f;
    CHECK_THROWS_AS(nominal_source(f.p, f.cfg, f.eq, NominalControllerState{}, 0, 30.0, 0.0), ValidationError);
}

TEST_CASE("load law", "[nominal]") {
    Fixture f;
    CHECK(nominal_load(f.cfg, f.eq, f.eq.i_f_star, 12.0) == f.eq.d_l_star);
    CHECK(nominal_load(f.cfg, f.eq, 1.0, 0.5) == f.eq.d_l_star);
    CHECK(nominal_load(f.cfg, f.eq, 1.0, 0.0) == f.eq.d_l_star);
    const double d = nominal_load(f.cfg, f.eq, 1.0, 1.0);
    CHECK(d == Approx(54.7571428571428571).epsilon(1e-14));
    CHECK(clamp_duty(d).value == 1.0);
    CHECK(clamp_duty(d).clamped);
}

TEST_CASE("nominal laws are Lipschitz away from the v_b guard", "[nominal][property]") {
    Fixture f;
    const auto st = NominalControllerState::capture(f.eq, f.eq.state(), 0.0);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> v(f.cfg.eps_v, 60.0), i(-50.0, 150.0), dv(-1e-3, 1e-3);
    const double M = 400.0;  // alpha_k max|i^_f| / eps_v^2 with margin
    for (int n = 0; n < 2000; ++n) {
        const double vb = v(rng), i_f = i(rng), dvb = dv(rng), dif = dv(rng);
        if (vb + dvb <= f.cfg.eps_v) {
            continue;
        }
        const double du = nominal_load(f.cfg, f.eq, i_f + dif, vb + dvb) - nominal_load(f.cfg, f.eq, i_f, vb);
        CHECK(std::abs(du) <= M * std::hypot(dvb, dif));
        const double vs = v(rng);
        const double dus = nominal_source(f.p, f.cfg, f.eq, st, 0, vs + dvb, 0.01) -
                           nominal_source(f.p, f.cfg, f.eq, st, 0, vs, 0.01);
        CHECK(std::abs(dus) <= 0.01 * std::abs(dvb) * (1 + 1e-9) + 1e-12);
    }
}

TEST_CASE("default tuning passes validation and matches the stated values", "[nominal][config]") {
    Fixture f;
    CHECK_NOTHROW(f.cfg.validate(f.p));
    CHECK(f.cfg.alpha == std::vector<double>{0.01, 0.01, 0.6});
    CHECK(f.cfg.m == std::vector<double>{10, 10, 10});
    CHECK(f.cfg.beta == std::vector<double>{0.1, 0.1, 0.1});
    CHECK(f.cfg.lambda.size() == 7);
    CHECK(f.cfg.sample_period == 50e-6);
    CHECK(f.cfg.limits(0) == Interval{20.0, 36.0});
    CHECK(f.cfg.limits(2) == Interval{-10.0, 120.0});
}

TEST_CASE("CLF margin bound", "[nominal][config]") {
    Fixture f;
    // Sources: Q (R* - R*/2) Q = diag(alpha/2, R/2), and R itself where LgH = 0.
    CHECK(max_clf_rate(f.p, f.cfg, 0) == Approx(std::min({0.005, f.p.sources[0].R / 2, f.p.sources[0].R})));
    // Load: diag(1/(2 R_l), alpha/2, 1/(2 r_l)) against 1/(R_l (1 + (d*/r_l)^2)).
    const double ratio = 0.5 / 0.175;
    CHECK(max_clf_rate(f.p, f.cfg, 2) == Approx(std::min(0.25, 1.0 / (2.0 * (1.0 + ratio * ratio)))));
}

TEST_CASE("config validation rejects inconsistent tuning", "[nominal][config]") {
    Fixture f;
    auto c = f.cfg;
    c.alpha[0] = 0.0;
    CHECK_THROWS_WITH(c.validate(f.p), Catch::Matchers::ContainsSubstring("alpha[0]"));
    c = f.cfg;
    c.lambda[3] *= 2.5;  // Lambda > R*: R* - Lambda not PSD
    CHECK_THROWS_WITH(c.validate(f.p), Catch::Matchers::ContainsSubstring("lambda[3]"));
    c = f.cfg;
    c.clf_rate[2] = 0.06;
    CHECK_THROWS_WITH(c.validate(f.p), Catch::Matchers::ContainsSubstring("clf_rate[2]"));
    c = f.cfg;
    c.v_limits[1] = {36.0, 20.0};
    CHECK_THROWS_AS(c.validate(f.p), ValidationError);
    c = f.cfg;
    c.eps_v = 0.0;
    CHECK_THROWS_AS(c.validate(f.p), ValidationError);
    c = f.cfg;
    c.m.pop_back();
    CHECK_THROWS_AS(c.validate(f.p), ValidationError);
    c = f.cfg;
    c.v_limits[0] = {-INFINITY, INFINITY};
    CHECK_NOTHROW(c.validate(f.p));
}
