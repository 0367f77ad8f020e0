#pragma once

// Top-level drivers.
//
// One FedNest epoch k: T inner rounds refine y at fixed x, then one outer
// round moves x using the refreshed y. The studied variants swap the two
// phases independently (rounds charged per epoch in parentheses):
//   fednest        inner SVRG  + federated outer chain   (2T + N + 3)
//   lfednest       local SGD   + local chains            (T + 1)
//   fednest_sgd    local SGD   + federated outer chain   (T + N + 3)
//   lfednest_svrg  inner SVRG  + local chains            (2T + 1)
// plus two baselines:
//   lfednest_nonalt  non-alternating control: every client updates its local
//                    y and then its local x inside one round, one aggregation
//                    per epoch (1);
//   fedavg_s         simultaneous gradient-descent-ascent on (x, y) with the
//                    shared stepsize alpha, minimax instances only (1).
//
// Participation: when the schedule asks for partial participation, one
// client subset is drawn per epoch and reused by every round inside it.
// FedAvg-S and the non-alternating control take their local step count from
// tau_outer.
//
// Determinism: all draws descend from (seed, epoch, phase, client, step,
// purpose) paths, so a run is a pure function of (instance, schedule,
// variant, seed). Metrics are recorded from exact closed forms before any
// update (epoch 0) and after every metric_stride-th epoch (the final epoch
// always included).

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fednest/ledger.hpp"
#include "fednest/problem.hpp"
#include "fednest/schedule.hpp"

namespace fednest {

enum class VariantKind {
    fednest,
    lfednest,
    fednest_sgd,
    lfednest_svrg,
    lfednest_nonalt,
    fedavg_s,
};

std::string to_string(VariantKind k);
// Parses the names above; throws ValidationError on anything else.
VariantKind variant_from_string(const std::string& name);

// Metrics of one recorded epoch; cumulative ledger columns are snapshots
// taken when the row was recorded.
struct TraceRow {
    std::size_t epoch = 0;
    std::uint64_t rounds = 0;     // cumulative charged communication rounds
    SampleCounts samples;         // cumulative oracle samples
    double grad_norm_sq = 0.0;    // ||grad f(x)||^2, exact reduced gradient
    double x_err_sq = 0.0;        // ||x - x*||^2
    double y_err_sq = 0.0;        // ||y - y*(x*)||^2 (0 when there is no y)
    double inner_err_sq = 0.0;    // ||y - y*(x)||^2 against the current x
    double f_value = 0.0;         // f(x) at the exact inner solution
};

struct RunTrace {
    VariantKind variant = VariantKind::fednest;
    std::uint64_t seed = 0;
    std::vector<TraceRow> rows;
    ParamPair final_iterate;
    RoundLedger ledger;
};

// The exact number of communication rounds one epoch charges, computable
// without running anything (theory mode resolves T and N from the instance
// constants first). run_variant's ledger grows by exactly this much per
// epoch.
std::uint64_t epoch_round_budget(const Problem& prob, VariantKind kind,
                                 const ScheduleConfig& cfg);

// Run one variant for cfg.K epochs. Divergence inside an epoch is rethrown
// with the epoch index prepended.
RunTrace run_variant(const Problem& prob, VariantKind kind, const ScheduleConfig& cfg,
                     std::uint64_t seed, std::size_t metric_stride = 1);

// Algorithm aliases for the two named drivers.
RunTrace run_fednest(const Problem& prob, const ScheduleConfig& cfg, std::uint64_t seed,
                     std::size_t metric_stride = 1);
RunTrace run_fedavg_s(const Problem& prob, const ScheduleConfig& cfg, std::uint64_t seed,
                      std::size_t metric_stride = 1);

}  // namespace fednest
