#pragma once

// Run configuration and stepsize schedules.
//
// Two modes:
//   * manual: alpha and beta are taken as given (any positive values; the
//     caller owns stability);
//   * theory: the guaranteed-rate schedule. From the instance's smoothness
//     constants a Lipschitz bundle (L_y, L_yx, M_f, L_f, sigma~_f^2, D~_f^2)
//     is derived, then the caps
//       alpha1 = 1 / (2 L_f + 4 M_f L_y + 2 M_f L_yx / (L_y eta)),
//       alpha2 = T / (8 l_g1 beta_bar),
//       alpha3 = 1 / (216 M_f^2 + 5 M_f),
//       beta_bar = (11 M_f L_y + eta L_yx D~_f^2 alpha1
//                   + M_f L_y alpha1 / 2) / mu_g,
//     and every epoch uses
//       alpha_k = min{alpha1, alpha2, alpha3, alpha_bar / sqrt(K)},
//       beta_k  = beta_bar * alpha_k / T.
//     The alpha2 cap makes beta_k <= 1/(8 l_g1) automatically, inside the
//     inner solver's contraction region. eta defaults to M_f / L_y for
//     bilevel instances and to 1 where the eta terms vanish (L_yx = 0).
// Local stepsizes are always the global ones split across the local loop:
// alpha_i = alpha_k / tau_outer, beta_i = beta_k / tau_inner.
//
// Theory mode also pins the loop shape: N = ceil(kappa_g ln K) (>= 1),
// T = ceil(kappa_f) for minimax, T = 1 for compositional. Manual mode takes
// N and T from the config.

#include <cstddef>

#include "fednest/problem.hpp"

namespace fednest {

enum class ScheduleMode { manual, theory };

struct ScheduleConfig {
    std::size_t K = 200;          // outer epochs (0 = record the initial point only)
    std::size_t T = 5;            // inner rounds per epoch
    std::size_t N = 5;            // Neumann budget
    std::size_t tau_inner = 2;    // local steps per inner round
    std::size_t tau_outer = 2;    // local steps per outer round
    ScheduleMode mode = ScheduleMode::manual;
    double alpha = 0.05;          // manual outer stepsize
    double beta = 0.1;            // manual inner stepsize
    double alpha_bar = 1.0;       // theory free constant in alpha_bar / sqrt(K)
    double eta = 0.0;             // theory free parameter; 0 = kind default
    std::size_t participation = 0;  // clients per epoch; 0 = all
    std::size_t ihgp_subset = 0;    // clients per chain step; 0 = all
};

// Derived Lipschitz bundle and the stepsize caps built from it. Positive by
// construction for valid instances; filled with the kind-specific
// specialisation (minimax: M_f = l_f1, L_yx = 0, ...).
struct ScheduleConstants {
    double L_y = 0.0;          // inner-solution sensitivity l_g1 / mu_g
    double L_yx = 0.0;         // cross-sensitivity (0 for quadratic inner)
    double M_f = 0.0;          // hypergradient bound factor
    double L_f = 0.0;          // hypergradient smoothness
    double sigma_tilde_sq = 0.0;
    double D_tilde_sq = 0.0;
    double eta = 1.0;          // the value actually used
    double alpha1 = 0.0;
    double alpha2 = 0.0;
    double alpha3 = 0.0;
    double beta_bar = 0.0;
};

struct StepSizes {
    double alpha_k = 0.0;  // global outer
    double beta_k = 0.0;   // global inner
    double alpha_i = 0.0;  // per-client outer (alpha_k / tau_outer)
    double beta_i = 0.0;   // per-client inner (beta_k / tau_inner)
};

// Validate the config against the instance (loop sizes >= 1 except K,
// positive stepsizes in manual mode, participation within the client count).
// Throws ValidationError.
void validate_schedule(const ScheduleConfig& cfg, const Problem& prob);

// Effective loop shape. Theory mode derives N and T from the constants as
// documented above; manual mode returns the configured values.
std::size_t effective_N(const ScheduleConfig& cfg, const Problem& prob);
std::size_t effective_T(const ScheduleConfig& cfg, const Problem& prob);

// The Lipschitz bundle and caps for this instance under this config. Only
// meaningful in theory mode but computable for any instance.
ScheduleConstants derive_schedule_constants(const Problem& prob, const ScheduleConfig& cfg);

// Stepsizes for epoch k (the schedule is constant across epochs; k is kept
// for interface stability).
StepSizes stepsize_schedule(std::size_t k, const ScheduleConfig& cfg,
                            const ScheduleConstants& sc, const Problem& prob);

// Optional diagnostic: f(x) + (M_f / L_y) * ||y - y*(x)||^2, the potential
// the guaranteed rate is stated against.
double lyapunov_value(const Problem& prob, const ScheduleConstants& sc, const ParamPair& z);

}  // namespace fednest
