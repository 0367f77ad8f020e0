#include "fednest/outer.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "fednest/errors.hpp"
#include "fednest/kernels.hpp"

namespace fednest {

namespace {

constexpr double kDivergenceLimit = 1e12;

void check_finite(const std::vector<double>& x, double stepsize, const char* which) {
    const double n2 = kernels::nrm2sq(x);
    if (!(n2 <= kDivergenceLimit * kDivergenceLimit))
        throw DivergenceError(which, stepsize, std::sqrt(n2));
}

void validate(const Problem& prob, const std::vector<std::size_t>& subset,
              const OuterStepConfig& cfg) {
    if (subset.empty()) throw ValidationError("outer round: empty client subset");
    if (!(cfg.alpha > 0.0)) throw ValidationError("outer round: alpha must be positive");
    if (cfg.tau < 1) throw ValidationError("outer round: tau must be >= 1");
    for (std::size_t i : subset)
        if (i >= prob.num_clients())
            throw ValidationError("outer round: client id " + std::to_string(i) +
                                  " out of range");
}

// Shared tail of every FedOut flavour: aggregate the h_i, then run the
// corrected local loops and aggregate the x_{i,tau}. `direct_anchors` holds
// each client's round-start direct estimate (empty => the direct part is
// identically zero, as in compositional mode, and no correction is drawn).
// Charges the 3 rounds (h_i aggregation, h broadcast, x aggregation).
std::vector<double> corrected_local_loops(const Problem& prob, const ParamPair& z,
                                          const std::vector<std::size_t>& subset,
                                          const OuterStepConfig& cfg,
                                          std::vector<std::vector<double>> h_parts,
                                          std::vector<std::vector<double>> direct_anchors,
                                          RngStream rng, RoundLedger& ledger) {
    const std::size_t d1 = prob.dim_x();
    const double alpha_i = cfg.local_step();
    const bool use_correction = !direct_anchors.empty();

    const std::vector<double> h = kernels::pairwise_mean(h_parts);
    ledger.record_exchange(d1);  // h_i up
    ledger.record_exchange(d1);  // h down

    std::size_t slot = 0;
    for (std::size_t i : subset) {
        RngStream ci = rng.fork(tag::client, i);
        ParamPair loc = z;
        for (std::size_t v = 0; v < cfg.tau; ++v) {
            std::vector<double> dir = h;
            if (use_correction) {
                RngStream s = ci.fork(tag::step, v).fork(tag::purpose, purpose::local_loop);
                const std::vector<double> g_loc = prob.sample_outer_grads(i, loc, s).gx;
                ledger.count_xi(1);
                if (cfg.correction == OuterCorrection::shared_sample) {
                    // Same draw at the local point and at the round anchor:
                    // the stream was copied, so the evaluations share the
                    // sample.
                    const std::vector<double> g_anc = prob.sample_outer_grads(i, z, s).gx;
                    for (std::size_t j = 0; j < d1; ++j) dir[j] += g_loc[j] - g_anc[j];
                } else {
                    // Stale form: subtract the direct estimate this client
                    // already contributed to h at the round start.
                    const std::vector<double>& g_anc = direct_anchors[slot];
                    for (std::size_t j = 0; j < d1; ++j) dir[j] += g_loc[j] - g_anc[j];
                }
            }
            kernels::axpy(-alpha_i, dir.data(), loc.x.data(), d1);
            check_finite(loc.x, alpha_i, "outer iterate");
        }
        h_parts[slot++] = std::move(loc.x);
    }
    std::vector<double> x_next = kernels::pairwise_mean(h_parts);
    ledger.record_exchange(d1);  // x up
    ledger.charge(3);
    check_finite(x_next, cfg.alpha, "aggregated outer iterate");
    return x_next;
}

}  // namespace

std::vector<double> fedout_round(const Problem& prob, const ParamPair& z,
                                 const std::vector<std::size_t>& subset,
                                 const OuterStepConfig& cfg, const IhgpConfig& ihgp,
                                 RngStream rng, RoundLedger& ledger) {
    validate(prob, subset, cfg);
    if (cfg.mode != ProblemKind::bilevel && cfg.mode != ProblemKind::minimax)
        throw UnsupportedConfigError(
            "fedout_round handles bilevel and minimax modes; use the dedicated "
            "compositional / single-level rounds");
    if (cfg.mode != prob.kind())
        throw ValidationError("fedout_round: config mode does not match the problem kind");
    if (z.x.size() != prob.dim_x() || z.y.size() != prob.dim_y())
        throw ValidationError("fedout_round: iterate dimensions do not match the problem");

    // Bilevel: federated chain first (charges its own N rounds).
    std::vector<double> p;
    if (cfg.mode == ProblemKind::bilevel)
        p = fedihgp(prob, z, ihgp, rng.fork(tag::purpose, purpose::ihgp), ledger);

    std::vector<std::vector<double>> h_parts;
    std::vector<std::vector<double>> anchors;
    h_parts.reserve(subset.size());
    anchors.reserve(subset.size());
    for (std::size_t i : subset) {
        RngStream ci = rng.fork(tag::client, i);
        if (cfg.mode == ProblemKind::bilevel) {
            HypergradEstimate est = client_surrogate(prob, i, z, p, ihgp, ci, ledger);
            anchors.push_back(est.direct);
            kernels::add(est.direct, est.indirect, est.direct);
            h_parts.push_back(std::move(est.direct));
        } else {
            RngStream s = ci.fork(tag::purpose, purpose::surrogate);
            h_parts.push_back(prob.sample_outer_grads(i, z, s).gx);
            anchors.push_back(h_parts.back());
            ledger.count_xi(1);
        }
    }
    return corrected_local_loops(prob, z, subset, cfg, std::move(h_parts),
                                 std::move(anchors), rng, ledger);
}

std::vector<double> fedout_compositional_round(const Problem& prob, const ParamPair& z,
                                               const std::vector<std::size_t>& subset,
                                               const OuterStepConfig& cfg, RngStream rng,
                                               RoundLedger& ledger) {
    validate(prob, subset, cfg);
    if (prob.kind() != ProblemKind::compositional ||
        cfg.mode != ProblemKind::compositional)
        throw ValidationError("fedout_compositional_round needs a compositional problem");
    if (z.x.size() != prob.dim_x() || z.y.size() != prob.dim_y())
        throw ValidationError(
            "fedout_compositional_round: iterate dimensions do not match the problem");
    const double l = prob.constants().l_g1;

    // Degenerate chain: one aggregated grad_y f round, seeded with N = 1.
    std::vector<std::vector<double>> parts;
    parts.reserve(subset.size());
    for (std::size_t i : subset) {
        RngStream s = rng.fork(tag::client, i).fork(tag::purpose, purpose::ihgp);
        std::vector<double> gy = prob.sample_outer_grads(i, z, s).gy;
        kernels::scale(gy, 1.0 / l);
        parts.push_back(std::move(gy));
    }
    const std::vector<double> p = kernels::pairwise_mean(parts);
    ledger.count_xi(subset.size());
    ledger.record_exchange(prob.dim_y());
    ledger.charge(1);

    // h_i = l_g1 * Jac r_i(x)^T p; the cross-Hessian oracle returns the
    // negated transposed Jacobian product.
    std::vector<std::vector<double>> h_parts;
    h_parts.reserve(subset.size());
    for (std::size_t i : subset) {
        RngStream s = rng.fork(tag::client, i).fork(tag::purpose, purpose::jacvec);
        std::vector<double> jv = prob.sample_jacvec(i, z, p, s);
        kernels::scale(jv, -l);
        h_parts.push_back(std::move(jv));
        ledger.count_zeta_jac(1);
    }
    // Direct gradient is identically zero, so there is nothing to correct in
    // the local loops.
    return corrected_local_loops(prob, z, subset, cfg, std::move(h_parts), {}, rng,
                                 ledger);
}

std::vector<double> fedout_single_level_round(const Problem& prob, const std::vector<double>& x,
                                              const std::vector<std::size_t>& subset,
                                              const OuterStepConfig& cfg, RngStream rng,
                                              RoundLedger& ledger) {
    validate(prob, subset, cfg);
    if (prob.kind() != ProblemKind::single_level ||
        cfg.mode != ProblemKind::single_level)
        throw ValidationError("fedout_single_level_round needs a single-level problem");
    if (x.size() != prob.dim_x())
        throw ValidationError(
            "fedout_single_level_round: iterate dimension does not match the problem");

    const ParamPair z{x, {}};
    std::vector<std::vector<double>> h_parts;
    std::vector<std::vector<double>> anchors;
    h_parts.reserve(subset.size());
    anchors.reserve(subset.size());
    for (std::size_t i : subset) {
        RngStream s = rng.fork(tag::client, i).fork(tag::purpose, purpose::surrogate);
        h_parts.push_back(prob.sample_outer_grads(i, z, s).gx);
        anchors.push_back(h_parts.back());
        ledger.count_xi(1);
    }
    return corrected_local_loops(prob, z, subset, cfg, std::move(h_parts),
                                 std::move(anchors), rng, ledger);
}

std::vector<double> lfedout_round(const Problem& prob, const ParamPair& z,
                                  const std::vector<std::size_t>& subset,
                                  const OuterStepConfig& cfg, const IhgpConfig& ihgp,
                                  RngStream rng, RoundLedger& ledger) {
    validate(prob, subset, cfg);
    if (cfg.mode != prob.kind())
        throw ValidationError("lfedout_round: config mode does not match the problem kind");
    if (z.x.size() != prob.dim_x() || z.y.size() != prob.dim_y())
        throw ValidationError("lfedout_round: iterate dimensions do not match the problem");
    const std::size_t d1 = prob.dim_x();
    const double alpha_i = cfg.local_step();

    std::vector<std::vector<double>> parts;
    parts.reserve(subset.size());
    for (std::size_t i : subset) {
        RngStream ci = rng.fork(tag::client, i);
        ParamPair loc = z;
        for (std::size_t v = 0; v < cfg.tau; ++v) {
            RngStream sv = ci.fork(tag::step, v);
            std::vector<double> dir;
            switch (cfg.mode) {
                case ProblemKind::bilevel: {
                    HypergradEstimate est = local_ihgp(
                        prob, i, loc, ihgp, sv.fork(tag::purpose, purpose::ihgp), ledger);
                    kernels::add(est.direct, est.indirect, est.direct);
                    dir = std::move(est.direct);
                    break;
                }
                case ProblemKind::compositional: {
                    // Jac r_i(x_{i,v})^T grad_y f_i(y): one shared outer draw
                    // feeds the chainless product; the direct part is zero.
                    OuterGrads og = prob.sample_outer_grads(
                        i, loc, sv.fork(tag::purpose, purpose::outer_grads));
                    ledger.count_xi(1);
                    dir = prob.sample_jacvec(i, loc, og.gy,
                                             sv.fork(tag::purpose, purpose::jacvec));
                    ledger.count_zeta_jac(1);
                    kernels::scale(dir, -1.0);
                    break;
                }
                default: {  // minimax, single_level: plain gradient draw
                    dir = prob.sample_outer_grads(
                                  i, loc, sv.fork(tag::purpose, purpose::outer_grads))
                              .gx;
                    ledger.count_xi(1);
                    break;
                }
            }
            kernels::axpy(-alpha_i, dir.data(), loc.x.data(), d1);
            check_finite(loc.x, alpha_i, "outer iterate");
        }
        parts.push_back(std::move(loc.x));
    }
    std::vector<double> x_next = kernels::pairwise_mean(parts);
    ledger.record_exchange(d1);
    ledger.charge(1);
    check_finite(x_next, cfg.alpha, "aggregated outer iterate");
    return x_next;
}

}  // namespace fednest
