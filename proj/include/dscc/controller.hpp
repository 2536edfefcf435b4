#pragma once

// One controller sample of one subsystem: nominal law, then (for DSCC) the
// CLF-CBF filter. Reads only the subsystem's local state.

#include "dscc/equilibrium.hpp"
#include "dscc/nominal.hpp"
#include "dscc/qp.hpp"
#include "dscc/safety.hpp"

#include <cstddef>
#include <string>

namespace dscc {

/// Bits of TraceRecord::flags.
enum TraceFlag : unsigned {
    kFlagClamp = 1,          ///< duty ratio saturated at actuation
    kFlagBoundary = 2,       ///< protected scalar outside or on its limits
    kFlagQpFault = 4,        ///< no QP candidate passed; fallback applied
    kFlagEventActive = 8,    ///< an attack or disturbance acted at this sample
    kFlagFfRecaptured = 16,  ///< a source feedforward was re-captured
    kFlagClfRelaxed = 32,    ///< exact mode: the hard CLF row yielded to the CBF row
    kFlagDiverged = 64,
};

enum class ControllerKind { Dscc, IdaPbc, OpenLoop };

const char* to_string(ControllerKind kind);
ControllerKind controller_kind_from_string(const std::string& name);

struct SubsystemStep {
    double u_nominal = 0.0;
    double u = 0.0;  ///< command before actuation clamping
    ClfTerms clf;
    CbfTerms cbf;
    QpSolution qp;
    unsigned flags = 0;
};

/// Nominal IDA-PBC output of subsystem j from its local state.
double nominal_step(const MicrogridParams& params, const ControllerConfig& cfg, const Equilibrium& eq,
                    const NominalControllerState& ctrl_state, std::size_t j,
                    const Eigen::Ref<const Eigen::VectorXd>& x_j, double t);

/// DSCC output of subsystem j. Throws SafeSetViolation when x_j is not
/// strictly inside its safe set.
SubsystemStep dscc_step(const MicrogridParams& params, const ControllerConfig& cfg, const Equilibrium& eq,
                        const NominalControllerState& ctrl_state, std::size_t j,
                        const Eigen::Ref<const Eigen::VectorXd>& x_j, double t);

}  // namespace dscc
