#pragma once

// Per-subsystem safety QP in (u, delta):
//
//   min (u - u0)^2 + m delta^2
//   s.t. a_V (u + delta) + b_V <= 0      (CLF, softened by delta)
//        a_B u + b_B <= 0                (CBF, hard)
//
// solved exactly by enumerating the four active sets.

#include "dscc/nominal.hpp"
#include "dscc/safety.hpp"

#include <cstddef>
#include <string>

namespace dscc {

enum ActiveSet : unsigned {
    kActiveNone = 0,
    kActiveClf = 1,
    kActiveCbf = 2,
};

std::string active_set_name(unsigned set);

struct QpProblem {
    double u0 = 0.0;
    double m = 1.0;
    double a_V = 0.0;
    double b_V = 0.0;
    double a_B = 0.0;
    double b_B = 0.0;
    bool slack = true;  ///< false pins delta = 0 (hard CLF row)

    double objective(double u, double delta) const;
    double clf_residual(double u, double delta) const { return a_V * (u + delta) + b_V; }
    double cbf_residual(double u) const { return a_B * u + b_B; }
    /// Both rows within 1e-9 * max(1, sum_i |a_i z_i| + |b|).
    bool feasible(double u, double delta) const;
    /// Throws ValidationError on m <= 0 or non-finite data.
    void validate() const;
};

enum class QpStatus { Optimal, Infeasible };

struct QpSolution {
    double u = 0.0;
    double delta = 0.0;
    unsigned active_set = kActiveNone;
    double objective = 0.0;
    double mu_clf = 0.0;  ///< multipliers of the active rows (0 when inactive)
    double mu_cbf = 0.0;
    QpStatus status = QpStatus::Optimal;
};

/// gamma(p) = ((m+1)/m) p for p >= 0, p otherwise.
double gamma(double p, double m);

/// Rows of subsystem j's QP. In relaxed mode the CLF constant is
/// gamma(decay_argument) - LgH u*, so the row reads
/// gamma(...) + LgH (u^ + delta) <= 0 in error coordinates; exact mode drops
/// gamma and the slack.
QpProblem assemble(std::size_t j, const ClfTerms& clf, const CbfTerms& cbf, double u0, const ControllerConfig& cfg);

/// Same rows with the mode forced, used for the exact-mode fallback.
QpProblem assemble(std::size_t j, const ClfTerms& clf, const CbfTerms& cbf, double u0, const ControllerConfig& cfg,
                   ClfMode mode);

QpSolution solve(const QpProblem& problem);

}  // namespace dscc
