#include "dscc/controller.hpp"

namespace dscc {

const char* to_string(ControllerKind kind) {
    switch (kind) {
        case ControllerKind::Dscc:
            return "dscc";
        case ControllerKind::IdaPbc:
            return "idapbc";
        case ControllerKind::OpenLoop:
            return "open-loop";
    }
    return "?";
}

ControllerKind controller_kind_from_string(const std::string& name) {
    if (name == "dscc") {
        return ControllerKind::Dscc;
    }
    if (name == "idapbc") {
        return ControllerKind::IdaPbc;
    }
    if (name == "open-loop") {
        return ControllerKind::OpenLoop;
    }
    throw ValidationError("controller must be one of dscc, idapbc, open-loop; got \"" + name + "\"");
}

double nominal_step(const MicrogridParams& params, const ControllerConfig& cfg, const Equilibrium& eq,
                    const NominalControllerState& ctrl_state, std::size_t j,
                    const Eigen::Ref<const Eigen::VectorXd>& x_j, double t) {
    if (j < params.num_sources()) {
        return nominal_source(params, cfg, eq, ctrl_state, j, x_j[0], t);
    }
    return nominal_load(cfg, eq, x_j[1], x_j[0]);
}

SubsystemStep dscc_step(const MicrogridParams& params, const ControllerConfig& cfg, const Equilibrium& eq,
                        const NominalControllerState& ctrl_state, std::size_t j,
                        const Eigen::Ref<const Eigen::VectorXd>& x_j, double t) {
    SubsystemStep step;
    step.cbf = cbf_terms(params, cfg, j, x_j);
    step.clf = clf_terms(params, cfg, eq, j, x_j);
    step.u_nominal = nominal_step(params, cfg, eq, ctrl_state, j, x_j, t);

    const QpProblem problem = assemble(j, step.clf, step.cbf, step.u_nominal, cfg);
    step.qp = solve(problem);
    if (step.qp.status == QpStatus::Infeasible && cfg.clf_mode == ClfMode::Exact) {
        step.flags |= kFlagClfRelaxed;
        if (problem.a_V != 0.0 && problem.a_B != 0.0) {
            // The CLF half-line alone is never empty, so the barrier row is what
            // excludes it. Keep the barrier and get as close to the CLF row as it
            // allows: the barrier boundary, i.e. the m -> inf limit of the
            // slack QP. delta reports the remaining CLF shortfall.
            QpSolution& q = step.qp;
            q.u = -problem.b_B / problem.a_B;
            q.delta = -problem.b_V / problem.a_V - q.u;
            q.active_set = kActiveClf | kActiveCbf;
            q.objective = problem.objective(q.u, 0.0);
            q.mu_clf = q.mu_cbf = 0.0;
            q.status = QpStatus::Optimal;
        } else {
            step.qp = solve(assemble(j, step.clf, step.cbf, step.u_nominal, cfg, ClfMode::Relaxed));
        }
    }
    if (step.qp.status == QpStatus::Infeasible) {
        // Beyond what the filter can guarantee. Project the nominal input onto the
        // barrier row when it has authority, otherwise pass the nominal through.
        step.flags |= kFlagQpFault;
        double u = step.u_nominal;
        if (step.cbf.bounded && step.cbf.LgB != 0.0) {
            const double b = step.cbf.LfB - step.cbf.rhs;
            if (step.cbf.LgB * u + b > 0.0) {
                u = -b / step.cbf.LgB;
            }
        }
        step.u = u;
        return step;
    }
    step.u = step.qp.u;
    return step;
}

}  // namespace dscc
