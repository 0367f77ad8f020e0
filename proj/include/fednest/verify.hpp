#pragma once

// Built-in oracle suites: self-contained numerical checks of the library's
// core guarantees, runnable from the CLI (`verify`) and reused verbatim by
// the acceptance suite. Each check constructs its own instances, compares
// against independently computed ground truth, and reports pass/fail with a
// one-line numeric detail (worst observed margin).

#include <string>
#include <vector>

namespace fednest {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

// Truncated inverse-Hessian chain: for random SPD Hessians across condition
// numbers {1.5, 2, 5, 10} and every budget N in 1..30, the exact enumeration
// average of the chain operator stays within the geometric tail bound
// (1/mu) ((kappa-1)/kappa)^N of the true inverse — exact inequality.
CheckResult check_neumann_tail_bound();

// Hypergradient surrogate bias: sigma = 0, exact inner solve on the nested
// quadratic instance; for N in {5, 10, 20} and every client, the exact
// expectation of the client surrogate differs from the ideal per-client
// hypergradient by at most kappa_g * l_f1 * ((kappa-1)/kappa)^N.
CheckResult check_hypergradient_bias();

// analytic_hypergradient agrees with central finite differences of the
// reduced objective within 1e-6 relative error at 20 random points.
CheckResult check_hypergradient_fd();

// Variance-reduced inner rounds contract: sigma = 0 quadratic instance,
// feasible stepsize; every per-round squared-error ratio is at most
// 1 - beta*mu_g/2 (+1e-12) across 100 rounds.
CheckResult check_inner_contraction();

// Client-drift separation on the pronounced-heterogeneity preset, tau = 10,
// sigma = 0: plain local inner rounds plateau above 1e-3 squared error while
// the variance-reduced rounds reach 1e-10.
CheckResult check_drift_separation();

// All of the above, in order.
std::vector<CheckResult> run_oracle_suite();

bool all_passed(const std::vector<CheckResult>& results);

}  // namespace fednest
