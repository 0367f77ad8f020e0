#pragma once

// Packaged synthetic problem families with closed-form ground truth. Every
// generator is deterministic in its seed, records exact (eigenvalue-derived)
// smoothness constants, and serves the stochastic oracle contract from
// problem.hpp.

#include <cstdint>

#include "fednest/linalg.hpp"
#include "fednest/problem.hpp"

namespace fednest {

// Saddle problem: min_x max_y (1/m) sum_i f_i(x,y) with
//   f_i(x,y) = -[ 1/2 ||y||^2 - b_i' y + y' A_i x ] + (lambda/2) ||x||^2,
//   A_i = t_i I,  t_i uniform in (0, t_max],  b_i Gaussian(0, s^2 I)
//   recentred so sum_i b_i = 0.
// Equivalent reduced objective: f(x) = 1/2 ||A_bar x - b_bar||^2 +
// (lambda/2)||x||^2, so with the recentring the solution is x* = 0, y* = 0.
struct MinimaxQuadraticSpec {
    std::size_t m = 20;
    std::size_t d = 10;
    double lambda = 10.0;
    double s = 1.0;      // heterogeneity scale of the client offsets b_i
    double t_max = 0.1;  // coupling strengths t_i ~ U(0, t_max]
    double r_op = 10.0;  // operating-ball radius entering l_f0
    double init_scale = 1.0;
    std::uint64_t seed = 1;
    // Report kind bilevel (g = -f) so the full nested machinery — inverse-
    // Hessian chain included — runs on this instance. Oracles are identical
    // either way; only the algorithm path selection changes.
    bool as_bilevel = false;
    NoiseLevels noise{};
};
ProblemPtr make_minimax_quadratic(const MinimaxQuadraticSpec& spec);

// Nested quadratic: inner g_i(x,y) = 1/2 y'Q_i y + y'(P_i x + c_i) with SPD
// Q_i whose spectra sit strictly inside [eig_min, eig_max]; outer
// f_i(x,y) = 1/2 ||y - a_i||^2 + (rho/2)||x - u_i||^2. Closed forms:
// y*(x) = -Qbar^{-1}(Pbar x + cbar), x* from the SPD stationarity system.
struct BilevelQuadraticSpec {
    std::size_t m = 10;
    std::size_t d1 = 5;
    std::size_t d2 = 5;
    double eig_min = 0.5;      // declared strong-convexity level (= recorded mu_g)
    double eig_max = 2.0;      // declared smoothness level (= recorded l_g1)
    double cross_scale = 0.25; // ||P_i|| <= cross_scale; must stay <= eig_min
    double cross_hetero = 1.0; // 0 => every client shares the same P
    double c_spread = 1.0;     // inner offsets c_i
    double a_spread = 1.0;     // outer y-targets a_i (0 => shared target)
    double u_spread = 1.0;     // outer x-targets u_i
    double rho = 1.0;          // outer curvature in x
    double r_op = 10.0;
    double init_scale = 1.0;
    std::uint64_t seed = 1;
    NoiseLevels noise{};
};
ProblemPtr make_bilevel_quadratic(const BilevelQuadraticSpec& spec);

// Same generator from explicit per-client data (used by test oracles that
// need a prescribed inner Hessian). Q[i] d2 x d2 SPD, P[i] d2 x d1, c/a d2,
// u d1. mu_g/l_g1 are the declared spectrum bracket the data respects.
struct BilevelQuadraticData {
    std::vector<Mat> Q;
    std::vector<Mat> P;
    std::vector<std::vector<double>> c, a, u;
    double rho = 1.0;
    double mu_g = 0.0;   // 0 => derive from eigenvalues
    double l_g1 = 0.0;   // 0 => derive from eigenvalues
    double r_op = 10.0;
    double init_scale = 1.0;
    std::uint64_t seed = 1;
    NoiseLevels noise{};
};
ProblemPtr make_bilevel_quadratic(const BilevelQuadraticData& data);

// Compositional: g_i(x,y) = 1/2 ||y - r_i(x)||^2 with affine r_i(x) = M_i x + v_i
// (inner Hessian exactly I, so the inverse-Hessian chain is exact after one
// term), outer f_i(y) = 1/2 ||y - w_i||^2. y*(x) = Mbar x + vbar.
struct CompositionalSpec {
    std::size_t m = 10;
    std::size_t d1 = 5;
    std::size_t d2 = 5;        // must be >= d1 so the reduced problem is determined
    double map_scale = 0.5;    // jitter of M_i around the identity embedding (< 1)
    double v_spread = 1.0;
    double w_spread = 1.0;
    double r_op = 10.0;
    double init_scale = 1.0;
    std::uint64_t seed = 1;
    NoiseLevels noise{};
};
ProblemPtr make_compositional(const CompositionalSpec& spec);

// Plain federated average: f_i(x) = 1/2 ||x - u_i||^2, optimum at the mean of
// the client targets. No inner problem (dim_y() == 0).
struct SingleLevelSpec {
    std::size_t m = 10;
    std::size_t d = 5;
    double u_spread = 1.0;
    double r_op = 10.0;
    double init_scale = 1.0;
    std::uint64_t seed = 1;
    NoiseLevels noise{};
};
ProblemPtr make_single_level(const SingleLevelSpec& spec);

// Named preset with pronounced client heterogeneity (wide inner spectra and
// offsets). Local-only inner solvers plateau visibly above the variance-
// reduced solver on it; used by the drift-separation checks.
BilevelQuadraticSpec heterogeneous_bilevel_preset();

}  // namespace fednest
