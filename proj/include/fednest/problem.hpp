#pragma once

// Client oracle model.
//
// A problem instance owns per-client data for a nested objective
//     min_x f(x) = (1/m) sum_i f_i(x, y*(x)),   y*(x) = argmin_y (1/m) sum_i g_i(x, y)
// and serves stochastic first/second-order oracles for it. Four kinds share
// the interface:
//   * bilevel:       general smooth f_i, strongly convex quadratic g_i in y;
//   * minimax:       g = -f (the inner problem maximises f over y), so the
//                    inner-gradient oracle returns grad_y(-f_i) and the
//                    second-order oracles differentiate -f_i;
//   * compositional: g_i(x,y) = 1/2 ||y - r_i(x)||^2, inner Hessian exactly I;
//   * single_level:  no inner problem at all (dim_y() == 0).
//
// Sampling contract: every sample equals the exact quantity plus additive
// Gaussian noise scaled by the relevant noise level (0 => exact). Streams are
// passed BY VALUE so a caller can evaluate the same draw at two points — the
// variance-reduction corrections depend on that. Oracles are immutable after
// construction and safe to call concurrently.

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "fednest/rng.hpp"

namespace fednest {

// Outer iterate x (dim d1) and inner iterate y (dim d2).
struct ParamPair {
    std::vector<double> x;
    std::vector<double> y;
};

// Standard deviations of the additive Gaussian oracle noise.
//   sigma_f : outer-gradient pair draws
//   sigma_g1: inner-gradient draws
//   sigma_g2: Hessian-vector / cross-Jacobian-vector draws
struct NoiseLevels {
    double sigma_f = 0.0;
    double sigma_g1 = 0.0;
    double sigma_g2 = 0.0;
    bool all_zero() const { return sigma_f == 0.0 && sigma_g1 == 0.0 && sigma_g2 == 0.0; }
};

// Exact smoothness/convexity constants of the packaged instance (eigenvalue-
// derived, not estimated).
//   mu_g : strong convexity of the inner objective in y (min eigenvalue over
//          the mean inner Hessian and every client's own);
//   l_g1 : max eigenvalue of any client inner Hessian (also the Neumann scale);
//   l_g2 : Lipschitz constant of the inner Hessian (0 for quadratics);
//   l_f1 : Lipschitz constant of the outer gradients;
//   l_f0 : bound on ||grad f_i|| over a declared operating ball around the
//          optimum (quadratics have no global bound; the ball radius is part
//          of the instance definition).
struct ProblemConstants {
    double mu_g = 1.0;
    double l_f0 = 1.0;
    double l_f1 = 1.0;
    double l_g1 = 1.0;
    double l_g2 = 0.0;
    double kappa_g() const { return l_g1 / mu_g; }
    // Condition number of the inner objective seen by the outer loop; for the
    // minimax kind the strong-concavity modulus in y coincides with mu_g.
    double kappa_f() const { return l_f1 / mu_g; }
};

enum class ProblemKind { bilevel, minimax, compositional, single_level };

std::string to_string(ProblemKind k);

// Outer-gradient pair from ONE shared draw: both partials are evaluated on
// the same sample, as the local corrections require.
struct OuterGrads {
    std::vector<double> gx;  // grad_x f_i, length d1
    std::vector<double> gy;  // grad_y f_i, length d2
};

class Problem {
public:
    virtual ~Problem() = default;

    virtual ProblemKind kind() const = 0;
    virtual std::size_t num_clients() const = 0;
    virtual std::size_t dim_x() const = 0;
    virtual std::size_t dim_y() const = 0;
    virtual const ProblemConstants& constants() const = 0;
    virtual const NoiseLevels& noise() const = 0;

    // --- stochastic oracles (client i, evaluation point z) -----------------

    // Draw of grad_y g_i(x, y). For minimax this is grad_y(-f_i); for
    // compositional it is y - r_i(x; draw).
    virtual std::vector<double> sample_inner_grad(std::size_t i, const ParamPair& z,
                                                  RngStream rng) const = 0;

    // Draw of (grad_x f_i, grad_y f_i) from one shared sample.
    virtual OuterGrads sample_outer_grads(std::size_t i, const ParamPair& z,
                                          RngStream rng) const = 0;

    // Draw of hess_yy g_i(x, y) * v. Linear in v for a fixed stream.
    virtual std::vector<double> sample_hessvec(std::size_t i, const ParamPair& z,
                                               const std::vector<double>& v,
                                               RngStream rng) const = 0;

    // Draw of hess_xy g_i(x, y) * v (maps dim_y -> dim_x). Linear in v for a
    // fixed stream. For compositional this is -Jac r_i(x; draw)^T v.
    virtual std::vector<double> sample_jacvec(std::size_t i, const ParamPair& z,
                                              const std::vector<double>& v,
                                              RngStream rng) const = 0;

    // --- exact ground truth (noise-independent; metrics and test oracles) --

    // y*(x): exact inner solution. Empty for single_level.
    virtual std::vector<double> solve_inner(const std::vector<double>& x) const = 0;

    // grad f(x) of the reduced objective, by closed form.
    virtual std::vector<double> analytic_hypergradient(const std::vector<double>& x) const = 0;

    // f(x) = (1/m) sum_i f_i(x, y*(x)).
    virtual double outer_value(const std::vector<double>& x) const = 0;

    virtual std::vector<double> optimum_x() const = 0;
    // y*(x*); empty for single_level.
    virtual std::vector<double> optimum_y() const = 0;

    // Default starting iterate for runs on this instance.
    virtual ParamPair initial_point() const = 0;
};

using ProblemPtr = std::shared_ptr<const Problem>;

}  // namespace fednest
