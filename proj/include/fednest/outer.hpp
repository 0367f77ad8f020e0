#pragma once

// Outer-variable optimizers.
//
// One FedOut round on the pair (x, y+):
//   1. bilevel only: run the federated inverse-Hessian chain to get p.
//   2. every participating client forms its surrogate
//        h_i = grad_x f_i(x, y+; xi_i) - hess_xy g_i(x, y+; zeta_i) p,
//      (minimax / single-level: the direct draw alone; compositional:
//      l_g1 * Jac r_i(x)^T p with a zero direct part) and the server
//      averages them into the guiding direction h.
//   3. each client runs tau local steps with a drift correction applied to
//      the direct part only — the same sample evaluated at the local point
//      and at the round anchor:
//        h_{i,v} = grad_x f_i(x_{i,v}, y+; xi_{i,v})
//                  - grad_x f_i(x, y+; xi_{i,v}) + h,
//        x_{i,v+1} = x_{i,v} - (alpha/tau) h_{i,v},
//      then the server averages the x_{i,tau}.
// The indirect part stays frozen inside h for the whole round: correcting it
// locally would need other clients' Hessian information.
//
// The anchor term of the correction has a second sanctioned form
// (OuterCorrection::stale_anchor): instead of re-evaluating the anchor
// gradient on the step's own sample, the client subtracts the stale direct
// estimate it already contributed to h at the round start. Default is the
// shared-sample form above.
//
// LFedOut instead keeps everything on-device: at every local step the client
// rebuilds its own full surrogate at its current point (bilevel: a private
// truncated chain over its own draws), and only the final average costs a
// round. No drift correction is applied.
//
// Round charges: bilevel FedOut N+3 (chain worst case + surrogate
// aggregation + broadcast of h + x aggregation), minimax and single-level 3,
// compositional 1+3, LFedOut always 1.

#include <cstddef>
#include <vector>

#include "fednest/hypergrad.hpp"
#include "fednest/ledger.hpp"
#include "fednest/problem.hpp"
#include "fednest/rng.hpp"

namespace fednest {

enum class OuterCorrection {
    shared_sample,  // anchor gradient re-drawn with the step's own sample
    stale_anchor,   // subtract the round-start direct estimate instead
};

struct OuterStepConfig {
    double alpha = 0.05;                       // global outer stepsize
    std::size_t tau = 1;                       // local steps per client
    ProblemKind mode = ProblemKind::bilevel;   // which surrogate recipe to run
    OuterCorrection correction = OuterCorrection::shared_sample;
    double local_step() const { return alpha / static_cast<double>(tau); }
};

// One FedOut round (bilevel or minimax mode). `ihgp` is only consulted in
// bilevel mode. Returns the aggregated next x.
std::vector<double> fedout_round(const Problem& prob, const ParamPair& z,
                                 const std::vector<std::size_t>& subset,
                                 const OuterStepConfig& cfg, const IhgpConfig& ihgp,
                                 RngStream rng, RoundLedger& ledger);

// Compositional specialization: p is a single aggregated inner-gradient
// round (the chain degenerates, the inner Hessian being exactly identity),
// the surrogate is l_g1 * Jac r_i(x)^T p, and the direct part is identically
// zero so the local drift correction vanishes.
std::vector<double> fedout_compositional_round(const Problem& prob, const ParamPair& z,
                                               const std::vector<std::size_t>& subset,
                                               const OuterStepConfig& cfg, RngStream rng,
                                               RoundLedger& ledger);

// Single-level FedOut: no inner variable, h_i is a plain gradient draw, the
// local loop uses the same direct-part correction.
std::vector<double> fedout_single_level_round(const Problem& prob, const std::vector<double>& x,
                                              const std::vector<std::size_t>& subset,
                                              const OuterStepConfig& cfg, RngStream rng,
                                              RoundLedger& ledger);

// One LFedOut round: per-client local surrogates at every step, one final
// aggregation, no corrections. Handles all four problem kinds.
std::vector<double> lfedout_round(const Problem& prob, const ParamPair& z,
                                  const std::vector<std::size_t>& subset,
                                  const OuterStepConfig& cfg, const IhgpConfig& ihgp,
                                  RngStream rng, RoundLedger& ledger);

}  // namespace fednest
