#include "dscc/qp.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace dscc {
namespace {

constexpr double kTol = 1e-9;

struct Row {
    std::array<double, 2> n;  // coefficients on (u, delta)
    double b;
};

struct Candidate {
    std::array<double, 2> z;
    std::array<double, 2> mu{0.0, 0.0};  // indexed by row
};

double row_value(const Row& r, const std::array<double, 2>& z) { return r.n[0] * z[0] + r.n[1] * z[1] + r.b; }

bool row_ok(const Row& r, const std::array<double, 2>& z) {
    // termwise: the u and delta products may cancel
    const double scale = std::abs(r.n[0] * z[0]) + std::abs(r.n[1] * z[1]) + std::abs(r.b);
    return row_value(r, z) <= kTol * std::max(1.0, scale);
}

}  // namespace

std::string active_set_name(unsigned set) {
    switch (set) {
        case kActiveNone:
            return "none";
        case kActiveClf:
            return "clf";
        case kActiveCbf:
            return "cbf";
        default:
            return "clf+cbf";
    }
}

double QpProblem::objective(double u, double delta) const { return (u - u0) * (u - u0) + m * delta * delta; }

bool QpProblem::feasible(double u, double delta) const {
    const Row clf{{a_V, slack ? a_V : 0.0}, b_V};
    const Row cbf{{a_B, 0.0}, b_B};
    const std::array<double, 2> z{u, slack ? delta : 0.0};
    return (slack || delta == 0.0) && row_ok(clf, z) && row_ok(cbf, z);
}

void QpProblem::validate() const {
    if (!(std::isfinite(m) && m > 0.0)) {
        throw ValidationError("QpProblem: m must be finite and > 0");
    }
    for (double v : {u0, a_V, b_V, a_B, b_B}) {
        if (!std::isfinite(v)) {
            throw ValidationError("QpProblem: non-finite row data");
        }
    }
}

double gamma(double p, double m) { return p >= 0.0 ? (m + 1.0) / m * p : p; }

QpProblem assemble(std::size_t j, const ClfTerms& clf, const CbfTerms& cbf, double u0, const ControllerConfig& cfg) {
    return assemble(j, clf, cbf, u0, cfg, cfg.clf_mode);
}

QpProblem assemble(std::size_t j, const ClfTerms& clf, const CbfTerms& cbf, double u0, const ControllerConfig& cfg,
                   ClfMode mode) {
    QpProblem p;
    p.u0 = u0;
    p.m = cfg.m.at(j);
    p.slack = mode == ClfMode::Relaxed;
    const double arg = clf.decay_argument();
    p.a_V = clf.LgH;
    p.b_V = (p.slack ? gamma(arg, p.m) : arg) - clf.LgH * clf.u_star;
    if (cbf.bounded) {
        p.a_B = cbf.LgB;
        p.b_B = cbf.LfB - cbf.rhs;
    } else {
        p.a_B = 0.0;
        p.b_B = -1.0;
    }
    p.validate();
    return p;
}

QpSolution solve(const QpProblem& problem) {
    problem.validate();
    // Weighted least distance to z0 = (u0, 0) under W = diag(1, m); without
    // slack delta is pinned by giving the CLF row no delta coefficient and
    // never moving delta (W^{-1} entry 0).
    const std::array<double, 2> winv{1.0, problem.slack ? 1.0 / problem.m : 0.0};
    const std::array<Row, 2> rows{Row{{problem.a_V, problem.slack ? problem.a_V : 0.0}, problem.b_V},
                                  Row{{problem.a_B, 0.0}, problem.b_B}};
    const std::array<double, 2> z0{problem.u0, 0.0};

    auto wdot = [&](const Row& a, const Row& b) { return a.n[0] * winv[0] * b.n[0] + a.n[1] * winv[1] * b.n[1]; };

    QpSolution best;
    best.status = QpStatus::Infeasible;
    bool found = false;

    for (const unsigned set : {0u, 1u, 2u, 3u}) {  // none, clf, cbf, both
        Candidate c{z0};
        bool ok = true;
        if (set == kActiveClf || set == kActiveCbf) {
            const Row& r = rows[set == kActiveClf ? 0 : 1];
            const double nwn = wdot(r, r);
            if (nwn <= 0.0) {
                continue;  // a row without control authority cannot be made active
            }
            const double mu = row_value(r, z0) / nwn;
            c.mu[set == kActiveClf ? 0 : 1] = mu;
            for (int i = 0; i < 2; ++i) {
                c.z[i] = z0[i] - winv[i] * r.n[i] * mu;
            }
        } else if (set == (kActiveClf | kActiveCbf)) {
            const double g00 = wdot(rows[0], rows[0]);
            const double g01 = wdot(rows[0], rows[1]);
            const double g11 = wdot(rows[1], rows[1]);
            const double det = g00 * g11 - g01 * g01;
            if (!(std::abs(det) > 1e-14 * std::max(g00 * g11, 1e-300))) {
                continue;  // dependent rows: covered by the single-row candidates
            }
            const double r0 = row_value(rows[0], z0);
            const double r1 = row_value(rows[1], z0);
            c.mu[0] = (g11 * r0 - g01 * r1) / det;
            c.mu[1] = (g00 * r1 - g01 * r0) / det;
            // Nonsingular Gram matrix implies slack, a_V != 0 and a_B != 0: the
            // vertex follows from the rows directly, without cancelling
            // against z0.
            c.z[0] = -problem.b_B / problem.a_B;
            c.z[1] = -problem.b_V / problem.a_V - c.z[0];
        }
        // Active rows hold by construction; only the others can be violated.
        const double mu_floor = -kTol * std::max({1.0, std::abs(c.mu[0]), std::abs(c.mu[1])});
        ok = ((set & kActiveClf) || row_ok(rows[0], c.z)) && ((set & kActiveCbf) || row_ok(rows[1], c.z)) &&
             c.mu[0] >= mu_floor && c.mu[1] >= mu_floor;
        if (!ok) {
            continue;
        }
        const double obj = problem.objective(c.z[0], c.z[1]);
        if (!found || obj < best.objective - 1e-12 * std::max(1.0, best.objective)) {
            found = true;
            best.u = c.z[0];
            best.delta = c.z[1];
            best.active_set = set;
            best.objective = obj;
            best.mu_clf = c.mu[0];
            best.mu_cbf = c.mu[1];
            best.status = QpStatus::Optimal;
        }
    }
    if (!found) {
        best.u = problem.u0;
        best.delta = 0.0;
        best.objective = 0.0;
    }
    return best;
}

}  // namespace dscc
