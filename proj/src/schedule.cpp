#include "fednest/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "fednest/errors.hpp"
#include "fednest/kernels.hpp"

namespace fednest {

void validate_schedule(const ScheduleConfig& cfg, const Problem& prob) {
    if (cfg.T < 1) throw ValidationError("schedule: T must be >= 1");
    if (cfg.N < 1) throw ValidationError("schedule: N must be >= 1");
    if (cfg.tau_inner < 1) throw ValidationError("schedule: tau_inner must be >= 1");
    if (cfg.tau_outer < 1) throw ValidationError("schedule: tau_outer must be >= 1");
    if (cfg.mode == ScheduleMode::manual) {
        if (!(cfg.alpha > 0.0)) throw ValidationError("schedule: alpha must be positive");
        if (!(cfg.beta > 0.0) && prob.kind() != ProblemKind::single_level)
            throw ValidationError("schedule: beta must be positive");
    } else {
        if (!(cfg.alpha_bar > 0.0))
            throw ValidationError("schedule: alpha_bar must be positive");
        if (cfg.eta < 0.0) throw ValidationError("schedule: eta must be nonnegative");
    }
    if (cfg.participation > prob.num_clients())
        throw ValidationError("schedule: participation exceeds the client count");
    if (cfg.ihgp_subset > prob.num_clients())
        throw ValidationError("schedule: ihgp_subset exceeds the client count");
}

std::size_t effective_N(const ScheduleConfig& cfg, const Problem& prob) {
    if (cfg.mode == ScheduleMode::manual) return cfg.N;
    if (cfg.K <= 1) return 1;
    const double kappa = prob.constants().kappa_g();
    const double n = std::ceil(kappa * std::log(static_cast<double>(cfg.K)));
    return std::max<std::size_t>(1, static_cast<std::size_t>(n));
}

std::size_t effective_T(const ScheduleConfig& cfg, const Problem& prob) {
    if (cfg.mode == ScheduleMode::manual) return cfg.T;
    switch (prob.kind()) {
        case ProblemKind::minimax:
            return std::max<std::size_t>(
                1, static_cast<std::size_t>(std::ceil(prob.constants().kappa_f())));
        case ProblemKind::compositional:
            return 1;
        default:
            return cfg.T;
    }
}

ScheduleConstants derive_schedule_constants(const Problem& prob, const ScheduleConfig& cfg) {
    const ProblemConstants& c = prob.constants();
    const NoiseLevels& nz = prob.noise();
    ScheduleConstants sc;

    switch (prob.kind()) {
        case ProblemKind::minimax: {
            // The inner objective is -f itself: everything collapses onto the
            // outer constants and the cross terms vanish.
            sc.L_y = c.l_f1 / c.mu_g;
            sc.L_yx = 0.0;
            sc.M_f = c.l_f1;
            sc.L_f = c.l_f1 + c.l_f1 * c.l_f1 / c.mu_g;
            sc.sigma_tilde_sq = nz.sigma_f * nz.sigma_f;
            sc.D_tilde_sq = c.l_f0 * c.l_f0 + sc.sigma_tilde_sq;
            break;
        }
        case ProblemKind::single_level: {
            sc.L_y = 1.0;  // no inner problem; keep the bundle positive
            sc.L_yx = 0.0;
            sc.M_f = c.l_f1;
            sc.L_f = c.l_f1;
            sc.sigma_tilde_sq = nz.sigma_f * nz.sigma_f;
            sc.D_tilde_sq = c.l_f0 * c.l_f0 + sc.sigma_tilde_sq;
            break;
        }
        default: {  // bilevel and compositional share the general bundle
            const double mu = c.mu_g;
            const double kappa = c.kappa_g();
            sc.L_y = c.l_g1 / mu;
            sc.L_yx = c.l_g2 * (1.0 + sc.L_y) * (1.0 + kappa) / mu;
            const double second_order = (c.l_f0 / mu) * (c.l_g2 + c.l_g1 * c.l_g2 / mu);
            sc.M_f = c.l_f1 + c.l_g1 * c.l_f1 / mu + second_order;
            sc.L_f = c.l_f1 + c.l_g1 * (c.l_f1 + sc.M_f) / mu + second_order;
            const double sf2 = nz.sigma_f * nz.sigma_f;
            const double sg2 = nz.sigma_g2 * nz.sigma_g2;
            sc.sigma_tilde_sq =
                sf2 + 3.0 / (mu * mu) *
                          ((sf2 + c.l_f0 * c.l_f0) * (sg2 + 2.0 * c.l_g1 * c.l_g1) +
                           sf2 * c.l_g1 * c.l_g1);
            const double d0 = c.l_f0 + 2.0 * c.l_g1 * c.l_f1 / mu;
            sc.D_tilde_sq = d0 * d0 + sc.sigma_tilde_sq;
            break;
        }
    }

    sc.eta = cfg.eta > 0.0 ? cfg.eta
                           : (prob.kind() == ProblemKind::bilevel ? sc.M_f / sc.L_y : 1.0);

    sc.alpha1 =
        1.0 / (2.0 * sc.L_f + 4.0 * sc.M_f * sc.L_y + 2.0 * sc.M_f * sc.L_yx / (sc.L_y * sc.eta));
    sc.alpha3 = 1.0 / (216.0 * sc.M_f * sc.M_f + 5.0 * sc.M_f);
    sc.beta_bar = (11.0 * sc.M_f * sc.L_y + sc.eta * sc.L_yx * sc.D_tilde_sq * sc.alpha1 +
                   sc.M_f * sc.L_y * sc.alpha1 / 2.0) /
                  prob.constants().mu_g;
    const double T = static_cast<double>(effective_T(cfg, prob));
    sc.alpha2 = T / (8.0 * prob.constants().l_g1 * sc.beta_bar);
    return sc;
}

StepSizes stepsize_schedule(std::size_t /*k*/, const ScheduleConfig& cfg,
                            const ScheduleConstants& sc, const Problem& prob) {
    StepSizes s;
    if (cfg.mode == ScheduleMode::manual) {
        s.alpha_k = cfg.alpha;
        s.beta_k = prob.kind() == ProblemKind::single_level ? 0.0 : cfg.beta;
    } else {
        const double horizon =
            cfg.alpha_bar / std::sqrt(static_cast<double>(std::max<std::size_t>(1, cfg.K)));
        if (prob.kind() == ProblemKind::single_level) {
            // No inner loop: only the cubic cap and the horizon term apply.
            s.alpha_k = std::min(sc.alpha3, horizon);
            s.beta_k = 0.0;
        } else {
            s.alpha_k = std::min(std::min(sc.alpha1, sc.alpha2), std::min(sc.alpha3, horizon));
            const double T = static_cast<double>(effective_T(cfg, prob));
            s.beta_k = sc.beta_bar * s.alpha_k / T;
        }
    }
    s.alpha_i = s.alpha_k / static_cast<double>(cfg.tau_outer);
    s.beta_i = s.beta_k / static_cast<double>(cfg.tau_inner);
    return s;
}

double lyapunov_value(const Problem& prob, const ScheduleConstants& sc, const ParamPair& z) {
    double w = prob.outer_value(z.x);
    if (prob.dim_y() > 0) {
        const std::vector<double> ystar = prob.solve_inner(z.x);
        std::vector<double> diff(z.y.size());
        kernels::sub(z.y, ystar, diff);
        w += sc.M_f / sc.L_y * kernels::nrm2sq(diff);
    }
    return w;
}

}  // namespace fednest
