#include "dscc/qp_reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dscc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct HalfLine {
    double lo = -kInf;
    double hi = kInf;
    bool empty = false;
};

// {u : a u + b <= 0}
HalfLine feasible_u(double a, double b) {
    HalfLine h;
    if (a > 0.0) {
        h.hi = -b / a;
    } else if (a < 0.0) {
        h.lo = -b / a;
    } else if (b > 0.0) {
        h.empty = true;
    }
    return h;
}

HalfLine intersect(HalfLine x, const HalfLine& y) {
    x.lo = std::max(x.lo, y.lo);
    x.hi = std::min(x.hi, y.hi);
    x.empty = x.empty || y.empty || x.lo > x.hi;
    return x;
}

}  // namespace

ReferenceQpResult solve_reference(const QpProblem& p) {
    ReferenceQpResult r;
    HalfLine cbf = feasible_u(p.a_B, p.b_B);
    if (!p.slack) {
        const HalfLine both = intersect(cbf, feasible_u(p.a_V, p.b_V));
        if (both.empty) {
            return r;
        }
        r.feasible = true;
        r.u = std::clamp(p.u0, both.lo, both.hi);
        r.objective = p.objective(r.u, 0.0);
        return r;
    }
    if (cbf.empty || (p.a_V == 0.0 && p.b_V > 0.0)) {
        return r;
    }
    // Smallest slack at fixed u: delta(u) = -max(0, a_V u + b_V) / a_V, so
    // phi(u) = (u - u0)^2 + m max(0, a_V u + b_V)^2 / a_V^2 is convex and C^1.
    double u_free = p.u0;
    if (p.a_V != 0.0 && p.a_V * p.u0 + p.b_V > 0.0) {
        u_free = (p.u0 - p.m * p.b_V / p.a_V) / (1.0 + p.m);
    }
    r.feasible = true;
    r.u = std::clamp(u_free, cbf.lo, cbf.hi);
    r.delta = p.a_V != 0.0 ? -std::max(0.0, p.a_V * r.u + p.b_V) / p.a_V : 0.0;
    r.objective = p.objective(r.u, r.delta);
    return r;
}

}  // namespace dscc
