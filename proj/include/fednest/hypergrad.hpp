#pragma once

// Hypergradient machinery.
//
// The reduced gradient through the inner optimum decomposes per client into
//   direct   grad_x f_i(x, y)
//   indirect -hess_xy g_i(x, y) [hess_yy g(x, y)]^{-1} grad_y f_i(x, y),
// and the inverse is approximated by a Neumann series truncated at a UAR
// length N' in {0,...,N-1}:
//   p_0 = (N / l_g1) mean_{S_0} grad_y f_i,
//   p_n = mean_{S_n} (I - (1/l_g1) hess_yy g_i) p_{n-1},  n = 1..N'.
// Only matrix-vector products are ever formed and only vectors are
// aggregated. In expectation over N' the chain applies
//   (1/l_g1) sum_{n=0}^{N-1} (I - H/l_g1)^n,
// whose distance to H^{-1} decays geometrically in N — the bias budget
// exposed below. The chain truly stops after N'+1 aggregations; the ledger
// is charged the deterministic worst case N and logs the actual count.

#include <cstddef>
#include <vector>

#include "fednest/ledger.hpp"
#include "fednest/linalg.hpp"
#include "fednest/problem.hpp"
#include "fednest/rng.hpp"

namespace fednest {

struct IhgpConfig {
    std::size_t N = 5;        // Neumann budget (>= 1)
    std::size_t subset = 0;   // clients sampled per chain step; 0 = all
    double l_g1 = 0.0;        // series scale; 0 = take from ProblemConstants
    double scale(const ProblemConstants& c) const { return l_g1 > 0.0 ? l_g1 : c.l_g1; }
};

// One client's surrogate hypergradient, split into its two parts. The bias
// budget is what the truncation can cost at most:
//   b = kappa_g * l_f1 * ((kappa_g - 1)/kappa_g)^N,
// nonnegative and strictly decreasing in N (zero when kappa_g = 1).
struct HypergradEstimate {
    std::vector<double> direct;    // length d1
    std::vector<double> indirect;  // length d1
    double bias_budget = 0.0;
};

double neumann_bias_budget(const ProblemConstants& c, std::size_t N);

// Federated chain; returns p_{N'} (length d2). Consumes N'+1 aggregations,
// charges N. `rng` must be a stream reserved for this chain.
std::vector<double> fedihgp(const Problem& prob, const ParamPair& z,
                            const IhgpConfig& cfg, RngStream rng, RoundLedger& ledger);

// Every truncation of the same chain: element n is what fedihgp would return
// for N' = n, using draws identical to fedihgp's given the same rng. Used to
// enumerate the expectation over N' exactly in tests; no ledger involved.
std::vector<std::vector<double>> fedihgp_truncations(const Problem& prob, const ParamPair& z,
                                                     const IhgpConfig& cfg, RngStream rng);

// Indirect component for one client: -hess_xy g_i * p_vec, one fresh draw.
std::vector<double> indirect_grad(const Problem& prob, std::size_t i, const ParamPair& z,
                                  const std::vector<double>& p_vec, RngStream rng,
                                  RoundLedger& ledger);

// Client i's surrogate given the globally aggregated chain output p:
// a fresh outer-gradient draw for the direct part plus indirect_grad(p).
HypergradEstimate client_surrogate(const Problem& prob, std::size_t i, const ParamPair& z,
                                   const std::vector<double>& p, const IhgpConfig& cfg,
                                   RngStream rng, RoundLedger& ledger);

// Fully local surrogate for client i at z (both parts, one shared
// outer-gradient draw): direct = grad_x f_i, indirect via a Neumann chain
// over client i's own Hessian draws with its own UAR truncation. No
// aggregation rounds.
HypergradEstimate local_ihgp(const Problem& prob, std::size_t i, const ParamPair& z,
                             const IhgpConfig& cfg, RngStream rng, RoundLedger& ledger);

// Exact E over N' of the truncated-chain operator, as a dense d2 x d2 matrix:
//   (1/l_g1) sum_{n=0}^{N-1} (I - Hbar/l_g1)^n,
// where Hbar is the mean inner Hessian probed column-by-column through the
// oracles at z. Demands sigma = 0 (probing must be exact) — otherwise throws
// UnsupportedConfigError. Test oracle for the bias bounds.
Mat expected_ihgp_operator(const Problem& prob, const ParamPair& z, const IhgpConfig& cfg);

// Same expectation for an explicitly given SPD Hessian.
Mat expected_ihgp_operator(const Mat& hessian, std::size_t N, double l_g1);

}  // namespace fednest
