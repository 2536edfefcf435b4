#include "dscc/equilibrium.hpp"
#include "dscc/safety.hpp"

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

// Drift and input field of subsystem j read straight off the circuit
// equations: f = rhs(u = 0, z = 0), g = rhs(u = 1) - rhs(u = 0).
Eigen::VectorXd field(const MicrogridParams& p, std::size_t j, const Eigen::VectorXd& x, double u) {
    if (j < p.num_sources()) {
        const auto r = source_rhs(p, j, x[0], x[1], 0.0, u);
        return Eigen::Vector2d(r[0], r[1]);
    }
    const auto r = load_rhs(p, x[0], x[1], x[2], 0.0, u);
    return Eigen::Vector3d(r[0], r[1], r[2]);
}

double local_H(const Fixture& f, std::size_t j, const Eigen::VectorXd& x) {
    return clf_terms(f.p, f.cfg, f.eq, j, x).H;
}

// Directional derivative of phi along v by a central difference.
template <class Phi>
double directional(Phi phi, const Eigen::VectorXd& x, const Eigen::VectorXd& v) {
    const double h = 1e-6 / std::max(1.0, v.norm()) * std::max(1.0, x.norm());
    return (phi(x + h * v) - phi(x - h * v)) / (2 * h);
}

Eigen::VectorXd random_local(const Fixture& f, std::size_t j, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.05, 0.95), cur(-20.0, 60.0);
    if (j < f.p.num_sources()) {
        const auto lim = f.cfg.limits(j);
        return Eigen::Vector2d(lim.min + unit(rng) * lim.width(), cur(rng));
    }
    const auto lim = f.cfg.limits(j);
    return Eigen::Vector3d(20.0 + 20.0 * unit(rng), lim.min + unit(rng) * lim.width(), 30.0 * unit(rng));
}

}  // namespace

TEST_CASE("CLF vanishes at the setpoint and matches the energy of a unit error", "[safety]") {
    Fixture f;
    const auto x = f.eq.state();
    for (std::size_t j = 0; j < f.p.k(); ++j) {
        const auto c = clf_terms(f.p, f.cfg, f.eq, j, x.subsystem(j));
        CHECK(c.H == 0.0);
        CHECK(c.margin == 0.0);
        CHECK(c.error_sq == 0.0);
    }
    Eigen::Vector2d x0(f.eq.v_star[0] + 1.0, f.eq.i_t_star[0]);
    CHECK(clf_terms(f.p, f.cfg, f.eq, 0, x0).H == Approx(4.5e-5).epsilon(1e-12));
    CHECK(global_clf(f.p, f.eq, x) == 0.0);
}

TEST_CASE("CLF Lie derivatives agree with finite differences along the circuit fields", "[safety][property]") {
    Fixture f;
    std::mt19937_64 rng(3);
    for (std::size_t j = 0; j < f.p.k(); ++j) {
        for (int n = 0; n < 100; ++n) {
            const Eigen::VectorXd x = random_local(f, j, rng);
            const auto c = clf_terms(f.p, f.cfg, f.eq, j, x);
            const Eigen::VectorXd fx = field(f.p, j, x, 0.0);
            const Eigen::VectorXd gx = field(f.p, j, x, 1.0) - fx;
            auto H = [&](const Eigen::VectorXd& y) { return local_H(f, j, y); };
            const double fd_f = directional(H, x, fx);
            const double fd_g = directional(H, x, gx);
            CHECK(c.LfH == Approx(fd_f).epsilon(1e-5).margin(1e-6 * fx.norm()));
            CHECK(c.LgH == Approx(fd_g).epsilon(1e-5).margin(1e-6 * gx.norm()));
        }
    }
}

TEST_CASE("CLF port term is the coupling power at the setpoint", "[safety]") {
    Fixture f;
    Eigen::Vector2d xs(f.eq.v_star[1] + 0.3, f.eq.i_t_star[1] - 2.0);
    // z* = -v_b*, y^ = i^_t
    CHECK(clf_terms(f.p, f.cfg, f.eq, 1, xs).port == Approx(-2.0 * -32.0));
    Eigen::Vector3d xl(f.eq.v_b_star + 1.5, f.eq.i_f_star, f.eq.v_l_star);
    // z* = (i_t*), y^ = v^_b per line
    CHECK(clf_terms(f.p, f.cfg, f.eq, 2, xl).port == Approx(1.5 * f.eq.total_load_current));
}

TEST_CASE("barrier value and slope", "[safety]") {
    const Interval lim{28.0, 36.0};
    CHECK(reciprocal_barrier(32.0, lim) == Approx(0.0625));
    CHECK(reciprocal_barrier_derivative(32.0, lim) == 0.0);
    double prev = reciprocal_barrier(32.0, lim);
    for (double s = 32.5; s < 36.0; s += 0.5) {
        const double b = reciprocal_barrier(s, lim);
        CHECK(b > prev);
        CHECK(b >= 4.0 / (lim.width() * lim.width()));
        CHECK(reciprocal_barrier_derivative(s, lim) > 0.0);
        prev = b;
    }
    CHECK(reciprocal_barrier_derivative(30.0, lim) < 0.0);
    const double h = 1e-6;
    CHECK(reciprocal_barrier_derivative(33.7, lim) ==
          Approx((reciprocal_barrier(33.7 + h, lim) - reciprocal_barrier(33.7 - h, lim)) / (2 * h)).epsilon(1e-7));
}

TEST_CASE("CBF Lie derivatives agree with finite differences", "[safety][property]") {
    Fixture f;
    std::mt19937_64 rng(5);
    for (std::size_t j = 0; j < f.p.k(); ++j) {
        const auto lim = f.cfg.limits(j);
        const std::size_t protected_index = j < f.p.num_sources() ? 0 : 1;
        auto B = [&](const Eigen::VectorXd& y) { return reciprocal_barrier(y[protected_index], lim); };
        for (int n = 0; n < 100; ++n) {
            const Eigen::VectorXd x = random_local(f, j, rng);
            const auto c = cbf_terms(f.p, f.cfg, j, x);
            const Eigen::VectorXd fx = field(f.p, j, x, 0.0);
            const Eigen::VectorXd gx = field(f.p, j, x, 1.0) - fx;
            CHECK(c.bounded);
            CHECK(c.B == Approx(B(x)).epsilon(1e-14));
            CHECK(c.rhs == Approx(f.cfg.beta[j] / c.B));
            CHECK(c.LfB == Approx(directional(B, x, fx)).epsilon(1e-5).margin(1e-9 * fx.norm()));
            CHECK(c.LgB == Approx(directional(B, x, gx)).epsilon(1e-5).margin(1e-9 * gx.norm()));
        }
    }
}

TEST_CASE("CBF refuses states on or outside the safe set", "[safety]") {
    Fixture f;
    CHECK_THROWS_AS(cbf_terms(f.p, f.cfg, 0, Eigen::Vector2d(36.0, 0.0)), SafeSetViolation);
    CHECK_THROWS_AS(cbf_terms(f.p, f.cfg, 0, Eigen::Vector2d(20.0, 0.0)), SafeSetViolation);
    CHECK_THROWS_AS(cbf_terms(f.p, f.cfg, 1, Eigen::Vector2d(40.0, 0.0)), SafeSetViolation);
    try {
        cbf_terms(f.p, f.cfg, 2, Eigen::Vector3d(32.0, 130.0, 16.0));
        FAIL("expected SafeSetViolation");
    } catch (const SafeSetViolation& e) {
        CHECK(e.subsystem() == 2);
        CHECK(e.value() == 130.0);
        CHECK(e.limits() == f.cfg.i_f_limits);
    }
    CHECK_NOTHROW(cbf_terms(f.p, f.cfg, 0, Eigen::Vector2d(35.999, 0.0)));
}

TEST_CASE("an infinite limit makes the barrier vacuous", "[safety]") {
    Fixture f;
    f.cfg.v_limits[0] = {-INFINITY, INFINITY};
    const auto c = cbf_terms(f.p, f.cfg, 0, Eigen::Vector2d(1000.0, 5.0));
    CHECK_FALSE(c.bounded);
}

TEST_CASE("global CLF sums the local ones and its rate is the directional derivative", "[safety]") {
    Fixture f;
    std::mt19937_64 rng(9);
    std::normal_distribution<double> nrm(0.0, 1.0);
    for (int n = 0; n < 50; ++n) {
        SystemState x = f.eq.state();
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] += 3.0 * nrm(rng);
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < f.p.k(); ++j) {
            sum += local_H(f, j, x.subsystem(j));
        }
        CHECK(global_clf(f.p, f.eq, x) == Approx(sum).epsilon(1e-13));

        ControlInput u = f.eq.input();
        u.i_s[0] += nrm(rng);
        u.d_l = 0.4;
        const Eigen::VectorXd dx = global_rhs(f.p, x, u);
        auto H = [&](const Eigen::VectorXd& y) { return global_clf(f.p, f.eq, SystemState(2, y)); };
        CHECK(global_clf_rate(f.p, f.eq, x, u) == Approx(directional(H, x.values(), dx)).epsilon(1e-5).margin(1e-9 * dx.norm()));
    }
}
