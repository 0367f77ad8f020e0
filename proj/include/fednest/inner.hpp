#pragma once

// Inner-variable solvers.
//
// FedInn is a federated SVRG round: the server aggregates an anchor gradient
// q at the common iterate, then every client runs tau_i corrected local steps
//     q_{i,v} = G_i(y_{i,v}; z_{i,v}) - G_i(y; z_{i,v}) + q,
// where the SAME sample z_{i,v} is evaluated at the local and the anchor
// point (streams are value types, so the draw is replayed exactly). The
// correction removes client drift: the fixed point of the deterministic round
// map is the global inner optimum regardless of heterogeneity. Costs 2
// communication rounds (aggregate q; aggregate y).
//
// LFedInn is plain local SGD — no anchor, no correction, 1 round. Kept as the
// cheap, drift-prone counterpart.

#include <cstddef>
#include <vector>

#include "fednest/ledger.hpp"
#include "fednest/problem.hpp"
#include "fednest/rng.hpp"

namespace fednest {

struct InnerStepConfig {
    double beta = 0.1;     // global inner stepsize
    std::size_t tau = 1;   // local steps per client
    double local_step() const { return beta / static_cast<double>(tau); }
};

// One FedInn round from z = (x, y); returns the aggregated new y.
// `subset` lists the participating client ids (ascending, nonempty).
// Throws DivergenceError if any iterate norm passes 1e12.
std::vector<double> fedinn_round(const Problem& prob, const ParamPair& z,
                                 const std::vector<std::size_t>& subset,
                                 const InnerStepConfig& cfg, RngStream rng,
                                 RoundLedger& ledger);

// One LFedInn round: uncorrected local SGD, single aggregation.
std::vector<double> lfedinn_round(const Problem& prob, const ParamPair& z,
                                  const std::vector<std::size_t>& subset,
                                  const InnerStepConfig& cfg, RngStream rng,
                                  RoundLedger& ledger);

}  // namespace fednest
