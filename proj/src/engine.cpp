#include "fednest/engine.hpp"

#include <cmath>
#include <utility>

#include "fednest/errors.hpp"
#include "fednest/inner.hpp"
#include "fednest/kernels.hpp"
#include "fednest/outer.hpp"

namespace fednest {

std::string to_string(VariantKind k) {
    switch (k) {
        case VariantKind::fednest: return "fednest";
        case VariantKind::lfednest: return "lfednest";
        case VariantKind::fednest_sgd: return "fednest_sgd";
        case VariantKind::lfednest_svrg: return "lfednest_svrg";
        case VariantKind::lfednest_nonalt: return "lfednest_nonalt";
        case VariantKind::fedavg_s: return "fedavg_s";
    }
    return "unknown";
}

VariantKind variant_from_string(const std::string& name) {
    if (name == "fednest") return VariantKind::fednest;
    if (name == "lfednest") return VariantKind::lfednest;
    if (name == "fednest_sgd") return VariantKind::fednest_sgd;
    if (name == "lfednest_svrg") return VariantKind::lfednest_svrg;
    if (name == "lfednest_nonalt") return VariantKind::lfednest_nonalt;
    if (name == "fedavg_s") return VariantKind::fedavg_s;
    throw ValidationError("unknown algorithm variant '" + name + "'");
}

namespace {

constexpr double kDivergenceLimit = 1e12;

void check_finite(const std::vector<double>& v, double stepsize, const char* which) {
    const double n2 = kernels::nrm2sq(v);
    if (!(n2 <= kDivergenceLimit * kDivergenceLimit))
        throw DivergenceError(which, stepsize, std::sqrt(n2));
}

std::vector<std::size_t> epoch_subset(const Problem& prob, const ScheduleConfig& cfg,
                                      const RngStream& ek) {
    const std::size_t m = prob.num_clients();
    if (cfg.participation == 0 || cfg.participation >= m) {
        std::vector<std::size_t> all(m);
        for (std::size_t i = 0; i < m; ++i) all[i] = i;
        return all;
    }
    RngStream s = ek.fork(tag::purpose, purpose::subset);
    return s.sample_without_replacement(m, cfg.participation);
}

TraceRow make_row(const Problem& prob, const ParamPair& z, std::size_t epoch,
                  const RoundLedger& ledger) {
    TraceRow row;
    row.epoch = epoch;
    row.rounds = ledger.rounds();
    row.samples = ledger.samples();
    row.grad_norm_sq = kernels::nrm2sq(prob.analytic_hypergradient(z.x));
    {
        const std::vector<double> xs = prob.optimum_x();
        std::vector<double> d(xs.size());
        kernels::sub(z.x, xs, d);
        row.x_err_sq = kernels::nrm2sq(d);
    }
    if (prob.dim_y() > 0) {
        const std::vector<double> ys = prob.optimum_y();
        std::vector<double> d(ys.size());
        kernels::sub(z.y, ys, d);
        row.y_err_sq = kernels::nrm2sq(d);
        const std::vector<double> yx = prob.solve_inner(z.x);
        kernels::sub(z.y, yx, d);
        row.inner_err_sq = kernels::nrm2sq(d);
    }
    row.f_value = prob.outer_value(z.x);
    return row;
}

// The per-step direction of a fully local outer update (the LFedOut recipe):
// the client's own surrogate at its current local point.
std::vector<double> local_outer_direction(const Problem& prob, std::size_t i,
                                          const ParamPair& loc, const IhgpConfig& ihgp,
                                          RngStream sv, RoundLedger& ledger) {
    switch (prob.kind()) {
        case ProblemKind::bilevel: {
            HypergradEstimate est =
                local_ihgp(prob, i, loc, ihgp, sv.fork(tag::purpose, purpose::ihgp), ledger);
            kernels::add(est.direct, est.indirect, est.direct);
            return std::move(est.direct);
        }
        case ProblemKind::compositional: {
            OuterGrads og =
                prob.sample_outer_grads(i, loc, sv.fork(tag::purpose, purpose::outer_grads));
            ledger.count_xi(1);
            std::vector<double> dir =
                prob.sample_jacvec(i, loc, og.gy, sv.fork(tag::purpose, purpose::jacvec));
            ledger.count_zeta_jac(1);
            kernels::scale(dir, -1.0);
            return dir;
        }
        default: {
            std::vector<double> dir =
                prob.sample_outer_grads(i, loc, sv.fork(tag::purpose, purpose::outer_grads))
                    .gx;
            ledger.count_xi(1);
            return dir;
        }
    }
}

// Non-alternating control: each client refines its local y, then its local x
// against that refreshed local y, and both are aggregated once.
void nonalt_epoch(const Problem& prob, ParamPair& z, const std::vector<std::size_t>& subset,
                  const StepSizes& steps, const ScheduleConfig& cfg, const IhgpConfig& ihgp,
                  const RngStream& ek, RoundLedger& ledger) {
    std::vector<std::vector<double>> xs, ys;
    xs.reserve(subset.size());
    ys.reserve(subset.size());
    for (std::size_t i : subset) {
        ParamPair loc = z;
        RngStream ri = ek.fork(tag::inner, 0).fork(tag::client, i);
        for (std::size_t v = 0; v < cfg.tau_inner; ++v) {
            RngStream s = ri.fork(tag::step, v).fork(tag::purpose, purpose::inner_grad);
            const std::vector<double> g = prob.sample_inner_grad(i, loc, s);
            ledger.count_zeta_grad(1);
            kernels::axpy(-steps.beta_i, g.data(), loc.y.data(), loc.y.size());
            check_finite(loc.y, steps.beta_i, "inner iterate");
        }
        RngStream ro = ek.fork(tag::outer, 0).fork(tag::client, i);
        for (std::size_t v = 0; v < cfg.tau_outer; ++v) {
            const std::vector<double> dir =
                local_outer_direction(prob, i, loc, ihgp, ro.fork(tag::step, v), ledger);
            kernels::axpy(-steps.alpha_i, dir.data(), loc.x.data(), loc.x.size());
            check_finite(loc.x, steps.alpha_i, "outer iterate");
        }
        xs.push_back(std::move(loc.x));
        ys.push_back(std::move(loc.y));
    }
    z.x = kernels::pairwise_mean(xs);
    z.y = kernels::pairwise_mean(ys);
    ledger.record_exchange(prob.dim_x());
    ledger.record_exchange(prob.dim_y());
    ledger.charge(1);
    check_finite(z.x, steps.alpha_k, "aggregated outer iterate");
    check_finite(z.y, steps.beta_k, "aggregated inner iterate");
}

// Simultaneous gradient-descent-ascent baseline with a shared stepsize.
void fedavg_s_epoch(const Problem& prob, ParamPair& z, const std::vector<std::size_t>& subset,
                    const StepSizes& steps, const ScheduleConfig& cfg, const RngStream& ek,
                    RoundLedger& ledger) {
    std::vector<std::vector<double>> xs, ys;
    xs.reserve(subset.size());
    ys.reserve(subset.size());
    for (std::size_t i : subset) {
        ParamPair loc = z;
        RngStream ri = ek.fork(tag::outer, 0).fork(tag::client, i);
        for (std::size_t v = 0; v < cfg.tau_outer; ++v) {
            RngStream s = ri.fork(tag::step, v).fork(tag::purpose, purpose::outer_grads);
            const OuterGrads og = prob.sample_outer_grads(i, loc, s);
            ledger.count_xi(1);
            // Descend in x, ascend in y, both from the same draw.
            kernels::axpy(-steps.alpha_i, og.gx.data(), loc.x.data(), loc.x.size());
            kernels::axpy(steps.alpha_i, og.gy.data(), loc.y.data(), loc.y.size());
            check_finite(loc.x, steps.alpha_i, "outer iterate");
            check_finite(loc.y, steps.alpha_i, "inner iterate");
        }
        xs.push_back(std::move(loc.x));
        ys.push_back(std::move(loc.y));
    }
    z.x = kernels::pairwise_mean(xs);
    z.y = kernels::pairwise_mean(ys);
    ledger.record_exchange(prob.dim_x());
    ledger.record_exchange(prob.dim_y());
    ledger.charge(1);
    check_finite(z.x, steps.alpha_k, "aggregated outer iterate");
    check_finite(z.y, steps.alpha_k, "aggregated inner iterate");
}

}  // namespace

std::uint64_t epoch_round_budget(const Problem& prob, VariantKind kind,
                                 const ScheduleConfig& cfg) {
    if (kind == VariantKind::lfednest_nonalt || kind == VariantKind::fedavg_s) return 1;
    const std::uint64_t T = effective_T(cfg, prob);
    const std::uint64_t N = effective_N(cfg, prob);
    const bool svrg_inner =
        kind == VariantKind::fednest || kind == VariantKind::lfednest_svrg;
    const bool federated_outer =
        kind == VariantKind::fednest || kind == VariantKind::fednest_sgd;
    // Inner phase: a variance-reduced round is two exchanges (anchor
    // aggregation + iterate aggregation), a plain local round is one.
    const std::uint64_t inner = prob.dim_y() == 0 ? 0 : T * (svrg_inner ? 2 : 1);
    std::uint64_t outer = 1;  // local outer rounds aggregate once
    if (federated_outer) {
        switch (prob.kind()) {
            case ProblemKind::bilevel: outer = N + 3; break;
            case ProblemKind::minimax: outer = 3; break;
            case ProblemKind::compositional: outer = 1 + 3; break;
            case ProblemKind::single_level: outer = 3; break;
        }
    }
    return inner + outer;
}

RunTrace run_variant(const Problem& prob, VariantKind kind, const ScheduleConfig& cfg,
                     std::uint64_t seed, std::size_t metric_stride) {
    validate_schedule(cfg, prob);
    if (metric_stride < 1) throw ValidationError("metric_stride must be >= 1");
    if (kind == VariantKind::fedavg_s && prob.kind() != ProblemKind::minimax)
        throw UnsupportedConfigError("fedavg_s is only defined for minimax instances");
    if (kind == VariantKind::lfednest_nonalt && prob.dim_y() == 0)
        throw UnsupportedConfigError("the non-alternating control needs an inner variable");

    const ScheduleConstants sc = derive_schedule_constants(prob, cfg);
    const std::size_t T = effective_T(cfg, prob);
    const IhgpConfig ihgp{effective_N(cfg, prob), cfg.ihgp_subset, 0.0};

    const bool svrg_inner =
        kind == VariantKind::fednest || kind == VariantKind::lfednest_svrg;
    const bool federated_outer =
        kind == VariantKind::fednest || kind == VariantKind::fednest_sgd;
    const bool has_inner_phase = prob.dim_y() > 0 && kind != VariantKind::lfednest_nonalt &&
                                 kind != VariantKind::fedavg_s;

    RunTrace trace;
    trace.variant = kind;
    trace.seed = seed;
    RngStream root(seed);
    ParamPair z = prob.initial_point();
    trace.rows.push_back(make_row(prob, z, 0, trace.ledger));

    for (std::size_t k = 0; k < cfg.K; ++k) {
        const RngStream ek = root.fork(tag::epoch, k);
        const std::vector<std::size_t> subset = epoch_subset(prob, cfg, ek);
        const StepSizes steps = stepsize_schedule(k, cfg, sc, prob);
        const InnerStepConfig icfg{steps.beta_k, cfg.tau_inner};
        OuterStepConfig ocfg;
        ocfg.alpha = steps.alpha_k;
        ocfg.tau = cfg.tau_outer;
        ocfg.mode = prob.kind();

        try {
            switch (kind) {
                case VariantKind::lfednest_nonalt:
                    nonalt_epoch(prob, z, subset, steps, cfg, ihgp, ek, trace.ledger);
                    break;
                case VariantKind::fedavg_s:
                    fedavg_s_epoch(prob, z, subset, steps, cfg, ek, trace.ledger);
                    break;
                default: {
                    if (has_inner_phase) {
                        for (std::size_t t = 0; t < T; ++t) {
                            const RngStream rt = ek.fork(tag::inner, t);
                            z.y = svrg_inner
                                      ? fedinn_round(prob, z, subset, icfg, rt, trace.ledger)
                                      : lfedinn_round(prob, z, subset, icfg, rt, trace.ledger);
                        }
                    }
                    const RngStream ro = ek.fork(tag::outer, 0);
                    if (!federated_outer) {
                        z.x = lfedout_round(prob, z, subset, ocfg, ihgp, ro, trace.ledger);
                    } else {
                        switch (prob.kind()) {
                            case ProblemKind::compositional:
                                z.x = fedout_compositional_round(prob, z, subset, ocfg, ro,
                                                                 trace.ledger);
                                break;
                            case ProblemKind::single_level:
                                z.x = fedout_single_level_round(prob, z.x, subset, ocfg, ro,
                                                                trace.ledger);
                                break;
                            default:
                                z.x = fedout_round(prob, z, subset, ocfg, ihgp, ro,
                                                   trace.ledger);
                                break;
                        }
                    }
                    break;
                }
            }
        } catch (const DivergenceError& e) {
            throw DivergenceError("epoch " + std::to_string(k) + ": " + e.which(),
                                  e.stepsize(), e.norm());
        }
        trace.ledger.next_epoch();
        if ((k + 1) % metric_stride == 0 || k + 1 == cfg.K)
            trace.rows.push_back(make_row(prob, z, k + 1, trace.ledger));
    }
    trace.final_iterate = std::move(z);
    return trace;
}

RunTrace run_fednest(const Problem& prob, const ScheduleConfig& cfg, std::uint64_t seed,
                     std::size_t metric_stride) {
    return run_variant(prob, VariantKind::fednest, cfg, seed, metric_stride);
}

RunTrace run_fedavg_s(const Problem& prob, const ScheduleConfig& cfg, std::uint64_t seed,
                      std::size_t metric_stride) {
    return run_variant(prob, VariantKind::fedavg_s, cfg, seed, metric_stride);
}

}  // namespace fednest
