#pragma once

// Communication-round and oracle-sample accounting.
//
// A communication round is one broadcast-plus-aggregate vector exchange
// between the server and the participating clients. The solvers charge a
// deterministic number of rounds per call — the worst case for the randomly
// truncated inverse-Hessian chain — so per-epoch budgets are exact integers:
//   FedNest        2T + N + 3
//   LFedNest        T + 1
//   FedNest_SGD     T + N + 3
//   LFedNest_SVRG  2T + 1
// The actually consumed rounds (the truncated chain stops after N'+1 <= N
// aggregations) are logged separately so the ledger reports both the budget
// and the truth.
//
// Sample counts tally DATA SAMPLES, not oracle calls: a variance-reduction
// correction evaluates one shared sample at two points and counts once.

#include <cstddef>
#include <cstdint>
#include <string>

#include "fednest/errors.hpp"

namespace fednest {

// Cumulative oracle sample draws by kind.
struct SampleCounts {
    std::uint64_t xi = 0;          // outer-gradient pair draws
    std::uint64_t zeta_grad = 0;   // inner-gradient draws
    std::uint64_t zeta_hess = 0;   // Hessian-vector draws
    std::uint64_t zeta_jac = 0;    // cross-Jacobian-vector draws
};

class RoundLedger {
public:
    // Charge `charged` budgeted rounds of which `actual` really happened
    // (defaulted: every charged round happened).
    void charge(std::uint64_t charged) { charge(charged, charged); }
    void charge(std::uint64_t charged, std::uint64_t actual) {
        rounds_ += charged;
        rounds_actual_ += actual;
    }

    // Validate one exchanged payload: only vectors (or scalars) ever travel.
    // A rows x cols payload with both dimensions above 1 is a matrix and is
    // rejected — the algorithms are communication-efficient by construction
    // and any matrix exchange is a bug.
    void record_exchange(std::size_t rows, std::size_t cols = 1) {
        if (rows > 1 && cols > 1)
            throw ValidationError("ledger: matrix-shaped payload (" + std::to_string(rows) +
                                  "x" + std::to_string(cols) +
                                  ") may not be communicated; only vectors travel");
        ++exchanges_;
    }

    void count_xi(std::uint64_t n) { samples_.xi += n; }
    void count_zeta_grad(std::uint64_t n) { samples_.zeta_grad += n; }
    void count_zeta_hess(std::uint64_t n) { samples_.zeta_hess += n; }
    void count_zeta_jac(std::uint64_t n) { samples_.zeta_jac += n; }

    void next_epoch() { ++epochs_; }

    std::uint64_t epochs() const { return epochs_; }
    std::uint64_t rounds() const { return rounds_; }
    std::uint64_t rounds_actual() const { return rounds_actual_; }
    std::uint64_t exchanges() const { return exchanges_; }
    const SampleCounts& samples() const { return samples_; }

private:
    std::uint64_t epochs_ = 0;
    std::uint64_t rounds_ = 0;         // budgeted (deterministic) rounds
    std::uint64_t rounds_actual_ = 0;  // rounds that actually happened
    std::uint64_t exchanges_ = 0;      // validated payloads
    SampleCounts samples_;
};

}  // namespace fednest
