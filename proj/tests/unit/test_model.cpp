#include "dscc/equilibrium.hpp"
#include "dscc/model.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace dscc;
using Catch::Approx;

namespace {

SystemState random_state(std::mt19937_64& rng, std::size_t ns) {
    std::uniform_real_distribution<double> v(-5.0, 60.0), i(-80.0, 150.0);
    SystemState x(ns);
    for (std::size_t k = 0; k < x.size(); ++k) {
        x[k] = (k % 2 == 0) ? v(rng) : i(rng);
    }
    return x;
}

}  // namespace

TEST_CASE("source_rhs matches hand-evaluated instances", "[model]") {
    const auto p = MicrogridParams::table3();
    // v=23, i_t=15, v_b=1, i_s=0 on source 1, evaluated independently in extended precision.
    const auto d = source_rhs(p, 0, 23.0, 15.0, 1.0, 0.0);
    CHECK(d[0] == Approx(-166666.666666666667).epsilon(1e-14));
    CHECK(d[1] == Approx(44323.0612244897959).epsilon(1e-14));

    const auto z = source_rhs(p, 1, 17.0, 0.0, 17.0, 0.0);
    CHECK(z[0] == 0.0);
    CHECK(z[1] == 0.0);
}

TEST_CASE("source_rhs at the rounded reference equilibrium", "[model]") {
    const auto p = MicrogridParams::table3();
    const auto eq = solve_dispatch(p);
    const auto d = source_rhs(p, 0, eq.v_star[0], eq.i_t_star[0], eq.v_b_star, eq.i_s_star[0]);
    CHECK(std::abs(d[0]) <= 1e-9);
    CHECK(std::abs(d[1]) <= 1e-9);

    // With the table's two-decimal values the residual is what the rounding
    // (at most 0.005 per entry) propagates to, not zero.
    const auto r = source_rhs(p, 0, 32.56, 30.01, 32.0, 30.01);
    const auto& s = p.sources[0];
    CHECK(r[0] == 0.0);
    CHECK(std::abs(r[1]) <= (0.005 + 0.005 * s.R + 0.005) / s.L);
}

TEST_CASE("load_rhs matches hand-evaluated instances", "[model]") {
    const auto p = MicrogridParams::table3();
    const auto d = load_rhs(p, 1.0, 1.0, 9.0, 27.0, 0.5);
    CHECK(d[0] == Approx(55319.1489361702128).epsilon(1e-14));
    CHECK(d[1] == Approx(-53125.0).epsilon(1e-14));
    CHECK(d[2] == Approx(-107294.832826747720).epsilon(1e-14));

    const auto z = load_rhs(p, 0.0, 0.0, 0.0, 0.0, 0.0);
    CHECK(z == std::array<double, 3>{0.0, 0.0, 0.0});

    const auto eq = solve_dispatch(p);
    const auto e = load_rhs(p, eq.v_b_star, eq.i_f_star, eq.v_l_star, eq.total_load_current, eq.d_l_star);
    for (double v : e) {
        CHECK(std::abs(v) <= 1e-9);
    }
}

TEST_CASE("rhs functions reject non-finite input", "[model]") {
    const auto p = MicrogridParams::table3();
    CHECK_THROWS_AS(source_rhs(p, 0, NAN, 0, 0, 0), ValidationError);
    CHECK_THROWS_AS(load_rhs(p, 0, INFINITY, 0, 0, 0), ValidationError);
    CHECK_THROWS_AS(source_rhs(p, 2, 0, 0, 0, 0), ValidationError);
}

TEST_CASE("global_rhs stacks the subsystem right-hand sides exactly", "[model]") {
    const auto p = MicrogridParams::table3();
    std::mt19937_64 rng(7);
    for (int n = 0; n < 100; ++n) {
        const SystemState x = random_state(rng, 2);
        const ControlInput u{{10.0 * n, -3.0}, 0.01 * n};
        const Eigen::VectorXd f = global_rhs(p, x, u);
        const auto s1 = source_rhs(p, 0, x.v(0), x.i_t(0), x.v_b(), u.i_s[0]);
        const auto s2 = source_rhs(p, 1, x.v(1), x.i_t(1), x.v_b(), u.i_s[1]);
        const auto l = load_rhs(p, x.v_b(), x.i_f(), x.v_l(), x.i_t(0) + x.i_t(1), u.d_l);
        const std::array<double, 7> stacked{s1[0], s1[1], s2[0], s2[1], l[0], l[1], l[2]};
        for (int i = 0; i < 7; ++i) {
            CHECK(f[i] == stacked[static_cast<std::size_t>(i)]);
        }
    }
}

TEST_CASE("global_rhs vanishes at the dispatch equilibrium", "[model]") {
    const auto p = MicrogridParams::table3();
    const auto eq = solve_dispatch(p);
    const double r = global_rhs(p, eq.state(), eq.input()).cwiseAbs().maxCoeff();
    CHECK(r <= 1e-9 * std::max(1.0, eq.state().values().cwiseAbs().maxCoeff()));
}

TEST_CASE("global_rhs checks dimensions", "[model]") {
    const auto p = MicrogridParams::table3();
    CHECK_THROWS_AS(global_rhs(p, SystemState(3), ControlInput{{0, 0}, 0}), ValidationError);
    CHECK_THROWS_AS(global_rhs(p, SystemState(2), ControlInput{{0}, 0}), ValidationError);
}

TEST_CASE("PH subsystems carry the stated matrices", "[model]") {
    const auto p = MicrogridParams::table3();
    const auto subs = build_ph_subsystems(p);
    REQUIRE(subs.size() == 3);
    const auto& s = p.sources[0];
    CHECK(subs[0].J(0, 1) == -1.0 / (s.L * s.C));
    CHECK(subs[0].J(1, 0) == 1.0 / (s.L * s.C));
    CHECK(subs[0].R(0, 0) == 0.0);
    CHECK(subs[0].R(1, 1) == Approx(s.R / (s.L * s.L)).epsilon(1e-15));
    CHECK(subs[0].Q == Eigen::Vector2d(s.C, s.L));
    const auto& l = p.load;
    CHECK(subs[2].R(0, 0) == Approx(1.0 / (l.R_l * l.C_b * l.C_b)).epsilon(1e-15));
    CHECK(subs[2].R(1, 1) == 0.0);
    CHECK(subs[2].R(2, 2) == Approx(1.0 / (l.r_l * l.C_l * l.C_l)).epsilon(1e-15));
    CHECK(subs[2].Q == Eigen::Vector3d(l.C_b, l.L_f, l.C_l));
}

TEST_CASE("PH form reproduces the direct right-hand side", "[model][property]") {
    const auto p = MicrogridParams::table3();
    const auto subs = build_ph_subsystems(p);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> us(-100.0, 100.0), ud(0.0, 1.0);
    for (int n = 0; n < 1000; ++n) {
        const SystemState x = random_state(rng, 2);
        const ControlInput u{{us(rng), us(rng)}, ud(rng)};
        const Eigen::VectorXd direct = global_rhs(p, x, u);
        Eigen::Index row = 0;
        for (const auto& sub : subs) {
            const Eigen::VectorXd xj = x.subsystem(sub.index);
            const Eigen::VectorXd ph = sub.dynamics(xj, u.component(sub.index), coupling_input(sub, x));
            for (Eigen::Index i = 0; i < ph.size(); ++i, ++row) {
                // relative to the summed term magnitudes, which bound the rounding of either form
                const Eigen::VectorXd dH = sub.gradient(xj);
                const double scale =
                    1e-12 * ((sub.J * dH).cwiseAbs()[i] + (sub.R * dH).cwiseAbs()[i] +
                             std::abs(sub.input_map(xj)[i] * u.component(sub.index)) +
                             (sub.g_z.cwiseAbs() * coupling_input(sub, x).cwiseAbs())[i]);
                CHECK(std::abs(ph[i] - direct[row]) <= scale);
            }
        }
    }
}

TEST_CASE("GIPH validator accepts valid structure and catches injected faults", "[model]") {
    const auto p = MicrogridParams::table3();
    auto subs = build_ph_subsystems(p);
    const auto eq = solve_dispatch(p);
    CHECK(validate_giph(subs, eq.state()).ok);

    auto bad_j = subs;
    bad_j[0].J(0, 1) += 1e-6;
    const auto r1 = validate_giph(bad_j, eq.state());
    CHECK_FALSE(r1.ok);
    CHECK_THAT(r1.failure, Catch::Matchers::ContainsSubstring("skew"));

    auto bad_r = subs;
    bad_r[2].R(0, 0) = -1.0;
    const auto r2 = validate_giph(bad_r, eq.state());
    CHECK_FALSE(r2.ok);
    CHECK_THAT(r2.failure, Catch::Matchers::ContainsSubstring("semidefinite"));
}

TEST_CASE("port powers cancel on random states", "[model][property]") {
    const auto p = MicrogridParams::table3();
    const auto subs = build_ph_subsystems(p);
    std::mt19937_64 rng(5);
    for (int n = 0; n < 1000; ++n) {
        const SystemState x = random_state(rng, 2);
        double sum = 0.0, scale = 0.0;
        for (const auto& sub : subs) {
            const double term = sub.output(x.subsystem(sub.index)).dot(coupling_input(sub, x));
            sum += term;
            scale += std::abs(term);
        }
        CHECK(std::abs(sum) <= 1e-12 * (1.0 + scale));
        CHECK(validate_giph(subs, x).ok);
    }
}

TEST_CASE("parameter validation names the violated invariant", "[model]") {
    auto p = MicrogridParams::table3();
    p.sources[1].C = -1e-3;
    CHECK_THROWS_WITH(p.validate(), Catch::Matchers::ContainsSubstring("sources[1].C"));
    p = MicrogridParams::table3();
    p.d_l_star = 1.5;
    CHECK_THROWS_WITH(p.validate(), Catch::Matchers::ContainsSubstring("d_l_star"));
    p = MicrogridParams::table3();
    p.sources.clear();
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p = MicrogridParams::table3();
    p.v_b_star = 0.0;
    CHECK_THROWS_AS(p.validate(), ValidationError);
}

TEST_CASE("state layout and duty clamp", "[model]") {
    CHECK(SystemState::names(2) == std::vector<std::string>{"v_1", "i_t_1", "v_2", "i_t_2", "v_b", "i_f", "v_l"});
    SystemState x(2);
    CHECK(x.v_b_index() == 4);
    CHECK(x.v_l_index() == 6);
    CHECK_THROWS_AS(SystemState(2, Eigen::VectorXd::Zero(6)), ValidationError);
    CHECK(clamp_duty(54.76).value == 1.0);
    CHECK(clamp_duty(54.76).clamped);
    CHECK(clamp_duty(-0.2).value == 0.0);
    CHECK_FALSE(clamp_duty(0.5).clamped);
}
