#pragma once

// Structural self-checks shared by `dscc verify` and the acceptance suite.

#include "dscc/equilibrium.hpp"
#include "dscc/nominal.hpp"
#include "dscc/qp.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace dscc {

struct CheckResult {
    std::string name;
    bool pass = true;
    double worst = 0.0;   ///< worst observed error in the check's own metric
    double bound = 0.0;   ///< the threshold it is compared against
    std::size_t samples = 0;
    std::string detail;
};

struct VerifyOptions {
    std::uint64_t seed = 0;
    std::size_t port_samples = 1000;
    std::size_t equivalence_samples = 1000;
    std::size_t lie_samples = 100;
    std::size_t qp_samples = 10000;
};

struct VerifyReport {
    std::vector<CheckResult> checks;
    bool pass() const;
};

VerifyReport run_verification(const MicrogridParams& params, const ControllerConfig& cfg,
                              const VerifyOptions& options = {});

/// Random state: sources uniformly inside their limits (5% inset when
/// `interior`), other coordinates over generous physical ranges.
SystemState random_state(const MicrogridParams& params, const ControllerConfig& cfg, std::mt19937_64& rng,
                         bool interior);

/// Random QP covering interior optima, single and double activity,
/// zero-authority rows, both slack modes and infeasible instances.
QpProblem random_qp_problem(std::mt19937_64& rng);

/// Individual checks, each usable on its own.
CheckResult check_structure(const MicrogridParams& params);
CheckResult check_port_cancellation(const MicrogridParams& params, const ControllerConfig& cfg,
                                    std::mt19937_64& rng, std::size_t samples);
CheckResult check_ph_equivalence(const MicrogridParams& params, const ControllerConfig& cfg, std::mt19937_64& rng,
                                 std::size_t samples);
CheckResult check_clf_lie_derivatives(const MicrogridParams& params, const ControllerConfig& cfg,
                                      const Equilibrium& eq, std::mt19937_64& rng, std::size_t samples);
CheckResult check_cbf_lie_derivatives(const MicrogridParams& params, const ControllerConfig& cfg,
                                      std::mt19937_64& rng, std::size_t samples);
CheckResult check_clf_gradient(const MicrogridParams& params, const Equilibrium& eq, const ControllerConfig& cfg,
                               std::mt19937_64& rng, std::size_t samples);
CheckResult check_equilibrium_residual(const MicrogridParams& params, const Equilibrium& eq);
CheckResult check_qp_reference(std::mt19937_64& rng, std::size_t samples);

}  // namespace dscc
