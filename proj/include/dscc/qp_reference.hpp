#pragma once

// Reference solution of the safety QP by a different route than solve():
// the slack is eliminated in closed form, leaving a convex piecewise
// quadratic in u that is minimized and then projected onto the CBF half-line.
// Used as a test oracle and by `dscc verify`.

#include "dscc/qp.hpp"

namespace dscc {

struct ReferenceQpResult {
    bool feasible = false;
    double u = 0.0;
    double delta = 0.0;
    double objective = 0.0;
};

ReferenceQpResult solve_reference(const QpProblem& problem);

}  // namespace dscc
