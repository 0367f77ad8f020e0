#include "fednest/inner.hpp"

#include <cmath>
#include <string>

#include "fednest/errors.hpp"
#include "fednest/kernels.hpp"

namespace fednest {

namespace {

constexpr double kDivergenceLimit = 1e12;

void check_finite(const std::vector<double>& y, double stepsize, const char* which) {
    const double n2 = kernels::nrm2sq(y);
    if (!(n2 <= kDivergenceLimit * kDivergenceLimit))
        throw DivergenceError(which, stepsize, std::sqrt(n2));
}

void validate(const Problem& prob, const std::vector<std::size_t>& subset,
              const InnerStepConfig& cfg) {
    if (subset.empty()) throw ValidationError("inner round: empty client subset");
    if (!(cfg.beta > 0.0)) throw ValidationError("inner round: beta must be positive");
    if (cfg.tau < 1) throw ValidationError("inner round: tau must be >= 1");
    for (std::size_t i : subset)
        if (i >= prob.num_clients())
            throw ValidationError("inner round: client id " + std::to_string(i) +
                                  " out of range");
}

}  // namespace

std::vector<double> fedinn_round(const Problem& prob, const ParamPair& z,
                                 const std::vector<std::size_t>& subset,
                                 const InnerStepConfig& cfg, RngStream rng,
                                 RoundLedger& ledger) {
    validate(prob, subset, cfg);
    const double beta_i = cfg.local_step();
    const std::size_t d2 = prob.dim_y();

    // Anchor pass: q = mean_i G_i(y; z_i). One aggregation round.
    std::vector<std::vector<double>> parts;
    parts.reserve(subset.size());
    for (std::size_t i : subset) {
        RngStream s = rng.fork(tag::client, i).fork(tag::purpose, purpose::anchor);
        parts.push_back(prob.sample_inner_grad(i, z, s));
    }
    const std::vector<double> q = kernels::pairwise_mean(parts);
    ledger.count_zeta_grad(subset.size());
    ledger.record_exchange(d2);

    // Corrected local loops, then the y aggregation round.
    std::size_t slot = 0;
    for (std::size_t i : subset) {
        ParamPair loc = z;
        for (std::size_t v = 0; v < cfg.tau; ++v) {
            RngStream s = rng.fork(tag::client, i).fork(tag::step, v)
                              .fork(tag::purpose, purpose::inner_grad);
            // Same draw at the local point and at the anchor: s by value.
            const std::vector<double> g_loc = prob.sample_inner_grad(i, loc, s);
            const std::vector<double> g_anc = prob.sample_inner_grad(i, z, s);
            for (std::size_t j = 0; j < d2; ++j)
                loc.y[j] -= beta_i * (g_loc[j] - g_anc[j] + q[j]);
            check_finite(loc.y, beta_i, "inner iterate");
        }
        ledger.count_zeta_grad(cfg.tau);
        parts[slot++] = std::move(loc.y);
    }
    std::vector<double> y_next = kernels::pairwise_mean(parts);
    ledger.record_exchange(d2);
    ledger.charge(2);
    check_finite(y_next, cfg.beta, "aggregated inner iterate");
    return y_next;
}

std::vector<double> lfedinn_round(const Problem& prob, const ParamPair& z,
                                  const std::vector<std::size_t>& subset,
                                  const InnerStepConfig& cfg, RngStream rng,
                                  RoundLedger& ledger) {
    validate(prob, subset, cfg);
    const double beta_i = cfg.local_step();
    const std::size_t d2 = prob.dim_y();

    std::vector<std::vector<double>> parts;
    parts.reserve(subset.size());
    for (std::size_t i : subset) {
        ParamPair loc = z;
        for (std::size_t v = 0; v < cfg.tau; ++v) {
            RngStream s = rng.fork(tag::client, i).fork(tag::step, v)
                              .fork(tag::purpose, purpose::inner_grad);
            const std::vector<double> g = prob.sample_inner_grad(i, loc, s);
            for (std::size_t j = 0; j < d2; ++j) loc.y[j] -= beta_i * g[j];
            check_finite(loc.y, beta_i, "inner iterate");
        }
        ledger.count_zeta_grad(cfg.tau);
        parts.push_back(std::move(loc.y));
    }
    std::vector<double> y_next = kernels::pairwise_mean(parts);
    ledger.record_exchange(d2);
    ledger.charge(1);
    check_finite(y_next, cfg.beta, "aggregated inner iterate");
    return y_next;
}

}  // namespace fednest
