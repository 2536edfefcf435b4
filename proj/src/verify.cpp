#include "dscc/verify.hpp"

#include "dscc/qp_reference.hpp"
#include "dscc/safety.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace dscc {
namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double log_uniform(std::mt19937_64& rng, double lo_exp, double hi_exp) {
    return std::pow(10.0, uniform(rng, lo_exp, hi_exp));
}

double signed_magnitude(std::mt19937_64& rng, double lo_exp, double hi_exp) {
    return (uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0) * log_uniform(rng, lo_exp, hi_exp);
}

double sample_in(std::mt19937_64& rng, const Interval& lim, double fallback_lo, double fallback_hi, bool interior) {
    const double lo = std::isfinite(lim.min) ? lim.min : fallback_lo;
    const double hi = std::isfinite(lim.max) ? lim.max : fallback_hi;
    const double inset = interior ? 0.05 * (hi - lo) : 0.0;
    return uniform(rng, lo + inset, hi - inset);
}

void worsen(CheckResult& c, double err) {
    if (!(err <= c.worst)) {  // NaN sticks
        c.worst = err;
    }
}

void finish(CheckResult& c) {
    c.pass = c.pass && c.worst <= c.bound;
    if (c.detail.empty()) {
        c.detail = fmt::format("worst {:.3e} (bound {:.1e}) over {} samples", c.worst, c.bound, c.samples);
    }
}

double subsystem_energy(const PhSubsystem& sub, const Eigen::VectorXd& x, const Eigen::VectorXd& x_star) {
    return sub.hamiltonian(x - x_star);
}

}  // namespace

bool VerifyReport::pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

SystemState random_state(const MicrogridParams& params, const ControllerConfig& cfg, std::mt19937_64& rng,
                         bool interior) {
    SystemState x(params.num_sources());
    for (std::size_t j = 0; j < params.num_sources(); ++j) {
        x[SystemState::v_index(j)] = sample_in(rng, cfg.limits(j), 0.0, 60.0, interior);
        x[SystemState::i_t_index(j)] = uniform(rng, -50.0, 100.0);
    }
    x[x.v_b_index()] = uniform(rng, 1.0, 40.0);
    x[x.i_f_index()] = sample_in(rng, cfg.i_f_limits, -50.0, 150.0, interior);
    x[x.v_l_index()] = uniform(rng, 0.0, 40.0);
    return x;
}

QpProblem random_qp_problem(std::mt19937_64& rng) {
    QpProblem p;
    auto coefficient = [&](double zero_probability) {
        return uniform(rng, 0.0, 1.0) < zero_probability ? 0.0 : signed_magnitude(rng, -3.0, 3.0);
    };
    p.u0 = signed_magnitude(rng, -2.0, 2.0);
    p.m = log_uniform(rng, -2.0, 3.0);
    p.a_V = coefficient(0.1);
    p.b_V = coefficient(0.05);
    p.a_B = coefficient(0.1);
    p.b_B = coefficient(0.05);
    p.slack = uniform(rng, 0.0, 1.0) < 0.8;
    return p;
}

CheckResult check_structure(const MicrogridParams& params) {
    CheckResult c;
    c.name = "J skew-symmetric, R symmetric PSD";
    const auto subs = build_ph_subsystems(params);
    const GiphReport r = validate_giph(subs, solve_dispatch(params).state());
    c.samples = subs.size();
    c.pass = r.ok;
    c.detail = r.ok ? fmt::format("{} subsystems", subs.size()) : r.failure;
    return c;
}

CheckResult check_port_cancellation(const MicrogridParams& params, const ControllerConfig& cfg,
                                    std::mt19937_64& rng, std::size_t samples) {
    CheckResult c;
    c.name = "port powers cancel: |sum y^T z| / (1 + sum |y^T z|)";
    c.bound = 1e-12;
    const auto subs = build_ph_subsystems(params);
    for (std::size_t n = 0; n < samples; ++n) {
        const GiphReport r = validate_giph(subs, random_state(params, cfg, rng, false));
        worsen(c, std::abs(r.port_sum) / (1.0 + r.port_scale));
        ++c.samples;
    }
    finish(c);
    return c;
}

CheckResult check_ph_equivalence(const MicrogridParams& params, const ControllerConfig& cfg, std::mt19937_64& rng,
                                 std::size_t samples) {
    CheckResult c;
    c.name = "PH form vs direct RHS (relative to summed term magnitudes)";
    c.bound = 1e-12;
    const auto subs = build_ph_subsystems(params);
    const std::size_t ns = params.num_sources();
    for (std::size_t n = 0; n < samples; ++n) {
        const SystemState x = random_state(params, cfg, rng, false);
        ControlInput u;
        for (std::size_t j = 0; j < ns; ++j) {
            u.i_s.push_back(uniform(rng, -100.0, 100.0));
        }
        u.d_l = uniform(rng, 0.0, 1.0);
        for (const auto& sub : subs) {
            const Eigen::VectorXd xj = x.subsystem(sub.index);
            const Eigen::VectorXd z = coupling_input(sub, x);
            const double uj = u.component(sub.index);
            const Eigen::VectorXd ph = sub.dynamics(xj, uj, z);
            Eigen::VectorXd direct(static_cast<Eigen::Index>(sub.dim()));
            if (sub.kind == SubsystemKind::Source) {
                const auto d = source_rhs(params, sub.index, x.v(sub.index), x.i_t(sub.index), x.v_b(), uj);
                direct << d[0], d[1];
            } else {
                const auto d = load_rhs(params, x.v_b(), x.i_f(), x.v_l(), x.line_current_sum(), uj);
                direct << d[0], d[1], d[2];
            }
            const Eigen::VectorXd dH = sub.gradient(xj);
            const Eigen::VectorXd scale = (sub.J * dH).cwiseAbs() + (sub.R * dH).cwiseAbs() +
                                          (sub.input_map(xj) * uj).cwiseAbs() +
                                          (sub.g_z.cwiseAbs() * z.cwiseAbs());
            for (Eigen::Index i = 0; i < ph.size(); ++i) {
                const double denom = std::max(scale[i], std::numeric_limits<double>::min());
                worsen(c, std::abs(ph[i] - direct[i]) / denom);
            }
        }
        ++c.samples;
    }
    finish(c);
    return c;
}

CheckResult check_clf_lie_derivatives(const MicrogridParams& params, const ControllerConfig& cfg,
                                      const Equilibrium& eq, std::mt19937_64& rng, std::size_t samples) {
    CheckResult c;
    c.name = "CLF LfH, LgH vs central differences of H_j along f_j, g_j";
    c.bound = 1e-6;
    const auto subs = build_ph_subsystems(params);
    for (std::size_t n = 0; n < samples; ++n) {
        const SystemState x = random_state(params, cfg, rng, true);
        for (const auto& sub : subs) {
            const Eigen::VectorXd xj = x.subsystem(sub.index);
            const Eigen::VectorXd xs = eq.subsystem(sub.index);
            const ClfTerms t = clf_terms(params, cfg, eq, sub.index, xj);
            const Eigen::VectorXd grad = sub.gradient(xj - xs);
            const Eigen::VectorXd f = sub.drift(xj);
            const Eigen::VectorXd g = sub.input_map(xj);
            for (const auto& [analytic, dir] : {std::pair{t.LfH, f}, std::pair{t.LgH, g}}) {
                const double norm = dir.norm();
                if (norm == 0.0) {
                    worsen(c, std::abs(analytic));
                    continue;
                }
                const double h = 1e-3 * (1.0 + xj.norm()) / norm;
                const double fd =
                    (subsystem_energy(sub, xj + h * dir, xs) - subsystem_energy(sub, xj - h * dir, xs)) / (2.0 * h);
                const double floor = 1e-9 * grad.norm() * norm;
                worsen(c, std::abs(fd - analytic) / std::max({std::abs(analytic), floor,
                                                              std::numeric_limits<double>::min()}));
            }
        }
        ++c.samples;
    }
    finish(c);
    return c;
}

CheckResult check_cbf_lie_derivatives(const MicrogridParams& params, const ControllerConfig& cfg,
                                      std::mt19937_64& rng, std::size_t samples) {
    CheckResult c;
    c.name = "CBF LfB, LgB vs central differences of B_j along f_j, g_j";
    c.bound = 1e-6;
    const auto subs = build_ph_subsystems(params);
    for (std::size_t n = 0; n < samples; ++n) {
        const SystemState x = random_state(params, cfg, rng, true);
        for (const auto& sub : subs) {
            const Interval& lim = cfg.limits(sub.index);
            if (!std::isfinite(lim.min) || !std::isfinite(lim.max)) {
                continue;
            }
            const Eigen::VectorXd xj = x.subsystem(sub.index);
            const CbfTerms t = cbf_terms(params, cfg, sub.index, xj);
            const Eigen::Index si = sub.kind == SubsystemKind::Source ? 0 : 1;
            const double dist = std::min(t.s - lim.min, lim.max - t.s);
            const Eigen::VectorXd f = sub.drift(xj);
            const Eigen::VectorXd g = sub.input_map(xj);
            for (const auto& [analytic, dir] : {std::pair{t.LfB, f}, std::pair{t.LgB, g}}) {
                if (dir[si] == 0.0) {
                    worsen(c, std::abs(analytic));
                    continue;
                }
                const double h = 1e-4 * dist / std::abs(dir[si]);
                const double fd = (reciprocal_barrier(xj[si] + h * dir[si], lim) -
                                   reciprocal_barrier(xj[si] - h * dir[si], lim)) /
                                  (2.0 * h);
                const double floor = 1e-9 * std::abs(dir[si]) * t.B / dist;
                worsen(c, std::abs(fd - analytic) / std::max({std::abs(analytic), floor,
                                                              std::numeric_limits<double>::min()}));
            }
        }
        ++c.samples;
    }
    finish(c);
    return c;
}

CheckResult check_clf_gradient(const MicrogridParams& params, const Equilibrium& eq, const ControllerConfig& cfg,
                               std::mt19937_64& rng, std::size_t samples) {
    CheckResult c;
    c.name = "global CLF gradient Q x^ vs central differences";
    c.bound = 1e-8;
    const Eigen::VectorXd q = clf_weights(params);
    for (std::size_t n = 0; n < samples; ++n) {
        SystemState x = random_state(params, cfg, rng, false);
        const Eigen::VectorXd grad = q.cwiseProduct(x.values() - eq.state().values());
        const double scale = std::max(grad.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double h = 1e-3 * (1.0 + std::abs(x[i]));
            SystemState xp = x;
            SystemState xm = x;
            xp[i] += h;
            xm[i] -= h;
            const double fd = (global_clf(params, eq, xp) - global_clf(params, eq, xm)) / (2.0 * h);
            worsen(c, std::abs(fd - grad[static_cast<Eigen::Index>(i)]) / scale);
        }
        ++c.samples;
    }
    finish(c);
    return c;
}

CheckResult check_equilibrium_residual(const MicrogridParams& params, const Equilibrium& eq) {
    CheckResult c;
    c.name = "equilibrium residual |f(x*) + g(x*) u*|_inf / max(1, |x*|_inf)";
    c.bound = 1e-9;
    const SystemState x = eq.state();
    const double r = global_rhs(params, x, eq.input()).cwiseAbs().maxCoeff();
    worsen(c, r / std::max(1.0, x.values().cwiseAbs().maxCoeff()));
    c.samples = 1;
    finish(c);
    return c;
}

CheckResult check_qp_reference(std::mt19937_64& rng, std::size_t samples) {
    CheckResult c;
    c.name = "active-set QP vs reference solution (objective, relative)";
    c.bound = 1e-6;
    std::size_t mismatched = 0;
    std::size_t infeasible = 0;
    for (std::size_t n = 0; n < samples; ++n) {
        const QpProblem p = random_qp_problem(rng);
        const QpSolution s = solve(p);
        const ReferenceQpResult r = solve_reference(p);
        ++c.samples;
        const bool feasible = s.status == QpStatus::Optimal;
        if (feasible != r.feasible || (feasible && !p.feasible(s.u, s.delta))) {
            ++mismatched;
            continue;
        }
        if (!feasible) {
            ++infeasible;
            continue;
        }
        const double floor = 1e-12 * (1.0 + p.u0 * p.u0);
        worsen(c, std::abs(s.objective - r.objective) / std::max(std::abs(r.objective), floor));
    }
    c.pass = mismatched == 0;
    finish(c);
    c.detail += fmt::format("; {} feasibility mismatches, {} infeasible instances", mismatched, infeasible);
    return c;
}

VerifyReport run_verification(const MicrogridParams& params, const ControllerConfig& cfg,
                              const VerifyOptions& options) {
    VerifyReport report;
    params.validate();
    CheckResult config;
    config.name = "controller configuration";
    config.samples = 1;
    try {
        cfg.validate(params);
        config.detail = "ok";
    } catch (const ValidationError& e) {
        config.pass = false;
        config.detail = e.what();
    }
    report.checks.push_back(config);
    if (!config.pass) {
        return report;
    }
    const Equilibrium eq = solve_dispatch(params);
    std::mt19937_64 rng(options.seed);
    report.checks.push_back(check_structure(params));
    report.checks.push_back(check_port_cancellation(params, cfg, rng, options.port_samples));
    report.checks.push_back(check_ph_equivalence(params, cfg, rng, options.equivalence_samples));
    report.checks.push_back(check_equilibrium_residual(params, eq));
    report.checks.push_back(check_clf_gradient(params, eq, cfg, rng, options.lie_samples));
    report.checks.push_back(check_clf_lie_derivatives(params, cfg, eq, rng, options.lie_samples));
    report.checks.push_back(check_cbf_lie_derivatives(params, cfg, rng, options.lie_samples));
    report.checks.push_back(check_qp_reference(rng, options.qp_samples));
    return report;
}

}  // namespace dscc
