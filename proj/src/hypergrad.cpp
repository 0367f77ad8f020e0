#include "fednest/hypergrad.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "fednest/errors.hpp"
#include "fednest/kernels.hpp"

namespace fednest {

namespace {

void validate(const Problem& prob, const ParamPair& z, const IhgpConfig& cfg) {
    if (cfg.N < 1) throw ValidationError("ihgp: N must be >= 1");
    if (!(cfg.scale(prob.constants()) > 0.0))
        throw ValidationError("ihgp: series scale must be positive");
    if (prob.dim_y() == 0)
        throw UnsupportedConfigError("ihgp: problem has no inner variable");
    if (z.x.size() != prob.dim_x() || z.y.size() != prob.dim_y())
        throw ValidationError("ihgp: iterate dimensions do not match the problem");
}

// Clients participating in chain step n. cfg.subset == 0 (or >= m) means all.
std::vector<std::size_t> step_subset(const Problem& prob, const IhgpConfig& cfg,
                                     const RngStream& chain_rng, std::uint64_t n) {
    const std::size_t m = prob.num_clients();
    if (cfg.subset == 0 || cfg.subset >= m) {
        std::vector<std::size_t> all(m);
        for (std::size_t i = 0; i < m; ++i) all[i] = i;
        return all;
    }
    RngStream s = chain_rng.fork(tag::term, n).fork(tag::purpose, purpose::subset);
    return s.sample_without_replacement(m, cfg.subset);
}

// The full chain p_0, ..., p_last. Streams depend only on (chain_rng, term
// index, client id), never on `last`, so any truncation of a longer chain is
// bit-identical to running a shorter one.
std::vector<std::vector<double>> run_chain(const Problem& prob, const ParamPair& z,
                                           const IhgpConfig& cfg, const RngStream& chain_rng,
                                           std::size_t last, RoundLedger* ledger) {
    const double l = cfg.scale(prob.constants());
    const double seed_scale = static_cast<double>(cfg.N) / l;
    const std::size_t d2 = prob.dim_y();

    std::vector<std::vector<double>> chain;
    chain.reserve(last + 1);
    std::vector<std::vector<double>> parts;

    // p_0 = (N/l) * mean of per-client grad_y f_i draws.
    {
        const std::vector<std::size_t> sub = step_subset(prob, cfg, chain_rng, 0);
        parts.clear();
        parts.reserve(sub.size());
        for (std::size_t i : sub) {
            RngStream s = chain_rng.fork(tag::term, 0)
                              .fork(tag::client, i)
                              .fork(tag::purpose, purpose::outer_grads);
            std::vector<double> gy = prob.sample_outer_grads(i, z, s).gy;
            kernels::scale(gy, seed_scale);
            parts.push_back(std::move(gy));
        }
        chain.push_back(kernels::pairwise_mean(parts));
        if (ledger) {
            ledger->count_xi(sub.size());
            ledger->record_exchange(d2);
        }
    }

    // p_n = mean of per-client (p_{n-1} - (1/l) hess_yy g_i * p_{n-1}) draws.
    for (std::size_t n = 1; n <= last; ++n) {
        const std::vector<double>& prev = chain.back();
        const std::vector<std::size_t> sub = step_subset(prob, cfg, chain_rng, n);
        parts.clear();
        parts.reserve(sub.size());
        for (std::size_t i : sub) {
            RngStream s = chain_rng.fork(tag::term, n)
                              .fork(tag::client, i)
                              .fork(tag::purpose, purpose::hessvec);
            std::vector<double> hv = prob.sample_hessvec(i, z, prev, s);
            std::vector<double> u(d2);
            kernels::step(prev.data(), 1.0 / l, hv.data(), u.data(), d2);
            parts.push_back(std::move(u));
        }
        chain.push_back(kernels::pairwise_mean(parts));
        if (ledger) {
            ledger->count_zeta_hess(sub.size());
            ledger->record_exchange(d2);
        }
    }
    return chain;
}

}  // namespace

double neumann_bias_budget(const ProblemConstants& c, std::size_t N) {
    const double kappa = c.kappa_g();
    return kappa * c.l_f1 * std::pow((kappa - 1.0) / kappa, static_cast<double>(N));
}

std::vector<double> fedihgp(const Problem& prob, const ParamPair& z,
                            const IhgpConfig& cfg, RngStream rng, RoundLedger& ledger) {
    validate(prob, z, cfg);
    // Truncation point N' uniform on {0, ..., N-1}, drawn from its own branch
    // so the chain draws are unaffected.
    const std::uint64_t n_trunc =
        rng.fork(tag::purpose, purpose::truncation).uniform_below(cfg.N);
    std::vector<std::vector<double>> chain =
        run_chain(prob, z, cfg, rng, static_cast<std::size_t>(n_trunc), &ledger);
    // Budgeted for the worst case; the actual chain used N'+1 rounds.
    ledger.charge(cfg.N, n_trunc + 1);
    return std::move(chain.back());
}

std::vector<std::vector<double>> fedihgp_truncations(const Problem& prob, const ParamPair& z,
                                                     const IhgpConfig& cfg, RngStream rng) {
    validate(prob, z, cfg);
    return run_chain(prob, z, cfg, rng, cfg.N - 1, nullptr);
}

std::vector<double> indirect_grad(const Problem& prob, std::size_t i, const ParamPair& z,
                                  const std::vector<double>& p_vec, RngStream rng,
                                  RoundLedger& ledger) {
    RngStream s = rng.fork(tag::purpose, purpose::jacvec);
    std::vector<double> jv = prob.sample_jacvec(i, z, p_vec, s);
    ledger.count_zeta_jac(1);
    kernels::scale(jv, -1.0);
    return jv;
}

HypergradEstimate client_surrogate(const Problem& prob, std::size_t i, const ParamPair& z,
                                   const std::vector<double>& p, const IhgpConfig& cfg,
                                   RngStream rng, RoundLedger& ledger) {
    HypergradEstimate est;
    OuterGrads og =
        prob.sample_outer_grads(i, z, rng.fork(tag::purpose, purpose::surrogate));
    ledger.count_xi(1);
    est.direct = std::move(og.gx);
    est.indirect = indirect_grad(prob, i, z, p, rng, ledger);
    est.bias_budget = neumann_bias_budget(prob.constants(), cfg.N);
    return est;
}

HypergradEstimate local_ihgp(const Problem& prob, std::size_t i, const ParamPair& z,
                             const IhgpConfig& cfg, RngStream rng, RoundLedger& ledger) {
    validate(prob, z, cfg);
    const double l = cfg.scale(prob.constants());
    const std::uint64_t n_trunc =
        rng.fork(tag::purpose, purpose::truncation).uniform_below(cfg.N);

    // One shared draw supplies both the direct part and the chain seed.
    OuterGrads og =
        prob.sample_outer_grads(i, z, rng.fork(tag::purpose, purpose::outer_grads));
    ledger.count_xi(1);

    std::vector<double> p = std::move(og.gy);
    kernels::scale(p, static_cast<double>(cfg.N) / l);
    for (std::uint64_t n = 1; n <= n_trunc; ++n) {
        RngStream s = rng.fork(tag::term, n).fork(tag::purpose, purpose::hessvec);
        const std::vector<double> hv = prob.sample_hessvec(i, z, p, s);
        kernels::axpy(-1.0 / l, hv.data(), p.data(), p.size());
        ledger.count_zeta_hess(1);
    }

    HypergradEstimate est;
    est.direct = std::move(og.gx);
    est.indirect = indirect_grad(prob, i, z, p, rng, ledger);
    est.bias_budget = neumann_bias_budget(prob.constants(), cfg.N);
    return est;
}

Mat expected_ihgp_operator(const Mat& hessian, std::size_t N, double l_g1) {
    if (hessian.rows != hessian.cols)
        throw ValidationError("expected_ihgp_operator: Hessian must be square");
    if (N < 1) throw ValidationError("expected_ihgp_operator: N must be >= 1");
    if (!(l_g1 > 0.0))
        throw ValidationError("expected_ihgp_operator: scale must be positive");
    const std::size_t d = hessian.rows;

    // M = I - H/l; accumulate (1/l) * (I + M + ... + M^{N-1}).
    Mat M = Mat::identity(d);
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c < d; ++c) M.at(r, c) -= hessian.at(r, c) / l_g1;

    Mat sum = Mat::identity(d);
    Mat power = Mat::identity(d);
    for (std::size_t n = 1; n < N; ++n) {
        power = linalg::matmul(power, M);
        for (std::size_t j = 0; j < d * d; ++j) sum.a[j] += power.a[j];
    }
    for (double& v : sum.a) v /= l_g1;
    return sum;
}

Mat expected_ihgp_operator(const Problem& prob, const ParamPair& z, const IhgpConfig& cfg) {
    validate(prob, z, cfg);
    if (!prob.noise().all_zero())
        throw UnsupportedConfigError(
            "expected_ihgp_operator: oracle probing needs noise-free instances");
    const std::size_t d2 = prob.dim_y();
    const std::size_t m = prob.num_clients();

    // Probe the mean inner Hessian column by column. Noise-free, so the
    // stream contents are irrelevant.
    Mat hbar(d2, d2);
    RngStream probe(0);
    std::vector<double> e(d2, 0.0);
    for (std::size_t c = 0; c < d2; ++c) {
        e[c] = 1.0;
        std::vector<std::vector<double>> cols;
        cols.reserve(m);
        for (std::size_t i = 0; i < m; ++i)
            cols.push_back(prob.sample_hessvec(i, z, e, probe));
        const std::vector<double> col = kernels::pairwise_mean(cols);
        for (std::size_t r = 0; r < d2; ++r) hbar.at(r, c) = col[r];
        e[c] = 0.0;
    }
    return expected_ihgp_operator(hbar, cfg.N, cfg.scale(prob.constants()));
}

}  // namespace fednest
