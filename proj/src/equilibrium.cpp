#include "dscc/equilibrium.hpp"

#include <cmath>
#include <functional>

namespace dscc {

SystemState Equilibrium::state() const {
    SystemState s(v_star.size());
    for (std::size_t j = 0; j < v_star.size(); ++j) {
        s[SystemState::v_index(j)] = v_star[j];
        s[SystemState::i_t_index(j)] = i_t_star[j];
    }
    s[s.v_b_index()] = v_b_star;
    s[s.i_f_index()] = i_f_star;
    s[s.v_l_index()] = v_l_star;
    return s;
}

ControlInput Equilibrium::input() const { return {i_s_star, d_l_star}; }

Equilibrium solve_dispatch(const MicrogridParams& params) {
    params.validate();
    const auto& l = params.load;
    Equilibrium eq;
    eq.v_b_star = params.v_b_star;
    eq.d_l_star = params.d_l_star;
    eq.v_l_star = params.d_l_star * params.v_b_star;
    eq.i_f_star = eq.v_l_star / l.r_l;
    // The converter draws d_l* i_f* from the bus, consistent with the KCL dynamics.
    eq.total_load_current = params.v_b_star / l.R_l + params.d_l_star * eq.i_f_star;

    double conductance = 0.0;
    for (const auto& s : params.sources) {
        conductance += 1.0 / s.R;
    }
    for (const auto& s : params.sources) {
        const double i_t = eq.total_load_current * (1.0 / s.R) / conductance;
        eq.i_t_star.push_back(i_t);
        eq.i_s_star.push_back(i_t);
        eq.v_star.push_back(i_t * s.R + params.v_b_star);
    }
    return eq;
}

double line_loss(const MicrogridParams& params, const std::vector<double>& i_t) {
    double loss = 0.0;
    for (std::size_t j = 0; j < i_t.size(); ++j) {
        loss += i_t[j] * i_t[j] * params.sources[j].R;
    }
    return loss;
}

DispatchOptimalityReport verify_dispatch_optimality(const MicrogridParams& params, const Equilibrium& eq,
                                                    double step, double local_span, double tolerance) {
    const std::size_t n = params.num_sources();
    DispatchOptimalityReport report;
    report.equilibrium_loss = line_loss(params, eq.i_t_star);
    report.best_grid_loss = report.equilibrium_loss;
    const double total = eq.total_load_current;

    std::vector<double> split(n, 0.0);
    auto consider = [&] {
        ++report.points_checked;
        const double loss = line_loss(params, split);
        if (loss < report.best_grid_loss) {
            report.best_grid_loss = loss;
            if (loss < report.equilibrium_loss - tolerance) {
                report.optimal = false;
                report.best_split = split;
            }
        }
    };

    if (n == 1) {
        split[0] = total;
        consider();
        return report;
    }

    double lo = 0.0;
    double hi = 0.0;
    if (n == 2) {
        lo = -2.0 * std::abs(total) - 1.0;
        hi = 2.0 * std::abs(total) + 1.0;
    }
    // Enumerate the first n-1 currents; the last one closes the KCL constraint.
    std::function<void(std::size_t, double)> recurse = [&](std::size_t j, double partial) {
        if (j + 1 == n) {
            split[j] = total - partial;
            consider();
            return;
        }
        const double from = n == 2 ? lo : eq.i_t_star[j] - local_span;
        const double to = n == 2 ? hi : eq.i_t_star[j] + local_span;
        const auto count = static_cast<long>(std::floor((to - from) / step));
        for (long s = 0; s <= count; ++s) {
            split[j] = from + static_cast<double>(s) * step;
            recurse(j + 1, partial + split[j]);
        }
    };
    recurse(0, 0.0);
    return report;
}

}  // namespace dscc
