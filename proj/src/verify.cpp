#include "fednest/verify.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <numeric>
#include <vector>

#include "fednest/hypergrad.hpp"
#include "fednest/inner.hpp"
#include "fednest/kernels.hpp"
#include "fednest/linalg.hpp"
#include "fednest/problems.hpp"

namespace fednest {
namespace {

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::vector<std::size_t> all_clients(const Problem& prob) {
    std::vector<std::size_t> s(prob.num_clients());
    std::iota(s.begin(), s.end(), std::size_t{0});
    return s;
}

// Unit-norm deterministic probe point of dimension d, scaled to `radius`.
std::vector<double> probe_point(std::size_t d, double radius, RngStream rng) {
    std::vector<double> x = rng.gaussian_vec(d);
    const double n = std::sqrt(kernels::nrm2sq(x));
    kernels::scale(x, radius / n);
    return x;
}

// Exact mean curvature and mean outer gradients at z, by probing the
// noise-free oracles.
Mat mean_inner_hessian(const Problem& prob, const ParamPair& z) {
    const std::size_t d2 = prob.dim_y();
    const std::size_t m = prob.num_clients();
    RngStream probe(7);
    Mat H(d2, d2);
    std::vector<double> e(d2, 0.0);
    for (std::size_t j = 0; j < d2; ++j) {
        e[j] = 1.0;
        std::vector<double> col(d2, 0.0);
        for (std::size_t i = 0; i < m; ++i)
            kernels::axpy(1.0, prob.sample_hessvec(i, z, e, probe), col);
        kernels::scale(col, 1.0 / static_cast<double>(m));
        for (std::size_t r = 0; r < d2; ++r) H.at(r, j) = col[r];
        e[j] = 0.0;
    }
    return H;
}

CheckResult failed(std::string name, const std::exception& e) {
    return {std::move(name), false, std::string("exception: ") + e.what()};
}

}  // namespace

CheckResult check_neumann_tail_bound() {
    const std::string name = "neumann-tail-bound";
    try {
        const std::size_t dim = 8;
        const std::size_t reps = 10;
        const std::size_t n_max = 30;
        const double kappas[] = {1.5, 2.0, 5.0, 10.0};
        RngStream root(0x1a5e);
        double worst_slack = 1e300;  // min over all cases of bound - err
        std::string worst_case;
        for (std::size_t ki = 0; ki < 4; ++ki) {
            const double kappa = kappas[ki];
            const double mu = 1.0;       // declared strong convexity
            const double ell = kappa;    // declared top eigenvalue = chain scale
            for (std::size_t rep = 0; rep < reps; ++rep) {
                // The 5% pad keeps the zero-tolerance inequality clear of the
                // rounding floor even at kappa = 1.5, N = 30 where the bound
                // itself is ~5e-15.
                const Mat H =
                    linalg::random_spd(dim, mu, ell, root.fork(ki * reps + rep), 0.05);
                const Mat Hinv = linalg::inverse_spd(H);
                // P = I - H/ell; running power term and running enumeration sum.
                Mat P = Mat::identity(dim);
                for (std::size_t r = 0; r < dim; ++r)
                    for (std::size_t c = 0; c < dim; ++c) P.at(r, c) -= H.at(r, c) / ell;
                Mat term = Mat::identity(dim);  // P^{N-1} once N's loop body runs
                Mat sum(dim, dim);              // sum_{n=0}^{N-1} P^n
                for (std::size_t N = 1; N <= n_max; ++N) {
                    for (std::size_t t = 0; t < dim * dim; ++t) sum.a[t] += term.a[t];
                    // Exact enumeration mean over the uniform truncation level:
                    // (1/N) sum_{N'=0}^{N-1} (N/ell) P^{N'} = sum / ell.
                    Mat diff = sum;
                    for (std::size_t t = 0; t < dim * dim; ++t)
                        diff.a[t] = diff.a[t] / ell - Hinv.a[t];
                    const double err = linalg::spectral_norm_sym(diff);
                    const double bound =
                        (1.0 / mu) * std::pow((kappa - 1.0) / kappa, static_cast<double>(N));
                    const double slack = bound - err;
                    if (slack < worst_slack) {
                        worst_slack = slack;
                        worst_case = "kappa=" + fmt(kappa) + " N=" + std::to_string(N);
                    }
                    term = linalg::matmul(P, term);
                }
            }
        }
        const bool ok = worst_slack >= 0.0;
        return {name, ok,
                "worst slack (bound - err) = " + fmt(worst_slack) + " at " + worst_case +
                    " over 40 matrices, N=1..30"};
    } catch (const std::exception& e) {
        return failed(name, e);
    }
}

CheckResult check_hypergradient_bias() {
    const std::string name = "hypergradient-bias-bound";
    try {
        BilevelQuadraticSpec spec;  // sigma = 0 defaults
        ProblemPtr prob = make_bilevel_quadratic(spec);
        const ProblemConstants& c = prob->constants();
        const std::size_t m = prob->num_clients();
        RngStream probe(11);

        double worst_slack = 1e300;
        std::string worst_case;
        for (std::size_t pi = 0; pi < 3; ++pi) {
            std::vector<double> x;
            if (pi == 0)
                x = prob->initial_point().x;
            else
                x = probe_point(prob->dim_x(), static_cast<double>(pi), RngStream(40 + pi));
            const ParamPair z{x, prob->solve_inner(x)};  // exact inner solve

            const Mat Hbar = mean_inner_hessian(*prob, z);
            std::vector<double> gybar(prob->dim_y(), 0.0);
            for (std::size_t i = 0; i < m; ++i)
                kernels::axpy(1.0, prob->sample_outer_grads(i, z, probe).gy, gybar);
            kernels::scale(gybar, 1.0 / static_cast<double>(m));
            const std::vector<double> p_ideal = linalg::solve_spd(Hbar, gybar);

            for (std::size_t N : {std::size_t{5}, std::size_t{10}, std::size_t{20}}) {
                IhgpConfig cfg;
                cfg.N = N;
                const Mat op = expected_ihgp_operator(*prob, z, cfg);
                const std::vector<double> p = linalg::matvec(op, gybar);
                const double bound = c.kappa_g() * c.l_f1 *
                                     std::pow((c.kappa_g() - 1.0) / c.kappa_g(),
                                              static_cast<double>(N));
                for (std::size_t i = 0; i < m; ++i) {
                    // E over the chain randomness of the client surrogate,
                    // minus the ideal per-client hypergradient: the direct
                    // parts coincide, leaving the Jacobian applied to the
                    // inverse-vs-chain difference.
                    const std::vector<double> ji_p = prob->sample_jacvec(i, z, p, probe);
                    const std::vector<double> ji_ideal =
                        prob->sample_jacvec(i, z, p_ideal, probe);
                    const double err =
                        std::sqrt(kernels::nrm2sq(kernels::stepped(ji_p, 1.0, ji_ideal)));
                    const double slack = bound - err;
                    if (slack < worst_slack) {
                        worst_slack = slack;
                        worst_case = "N=" + std::to_string(N) + " client " + std::to_string(i) +
                                     " point " + std::to_string(pi);
                    }
                }
            }
        }
        const bool ok = worst_slack >= 0.0;
        return {name, ok,
                "worst slack (bound - err) = " + fmt(worst_slack) + " at " + worst_case};
    } catch (const std::exception& e) {
        return failed(name, e);
    }
}

CheckResult check_hypergradient_fd() {
    const std::string name = "hypergradient-finite-difference";
    try {
        BilevelQuadraticSpec spec;
        ProblemPtr prob = make_bilevel_quadratic(spec);
        const std::size_t d1 = prob->dim_x();
        const double h = 1e-4;
        double worst_rel = 0.0;
        for (std::size_t pt = 0; pt < 20; ++pt) {
            std::vector<double> x = probe_point(d1, 1.0 + 0.1 * static_cast<double>(pt),
                                                RngStream(100 + pt));
            const std::vector<double> g = prob->analytic_hypergradient(x);
            std::vector<double> fd(d1, 0.0);
            for (std::size_t j = 0; j < d1; ++j) {
                std::vector<double> xp = x, xm = x;
                xp[j] += h;
                xm[j] -= h;
                fd[j] = (prob->outer_value(xp) - prob->outer_value(xm)) / (2.0 * h);
            }
            const double rel = std::sqrt(kernels::nrm2sq(kernels::stepped(fd, 1.0, g)) /
                                         kernels::nrm2sq(g));
            if (rel > worst_rel) worst_rel = rel;
        }
        const bool ok = worst_rel <= 1e-6;
        return {name, ok, "worst relative error over 20 points = " + fmt(worst_rel) +
                              " (limit 1e-06)"};
    } catch (const std::exception& e) {
        return failed(name, e);
    }
}

CheckResult check_inner_contraction() {
    const std::string name = "inner-contraction";
    try {
        BilevelQuadraticSpec spec;  // sigma = 0
        ProblemPtr prob = make_bilevel_quadratic(spec);
        const ProblemConstants& c = prob->constants();
        InnerStepConfig cfg;
        cfg.beta = 1.0 / (8.0 * c.l_g1);  // inside the guaranteed region
        cfg.tau = 4;
        const double limit = 1.0 - cfg.beta * c.mu_g / 2.0 + 1e-12;

        const ParamPair z0 = prob->initial_point();
        const std::vector<double> x = z0.x;
        const std::vector<double> ystar = prob->solve_inner(x);
        std::vector<double> y = z0.y;
        const std::vector<std::size_t> subset = all_clients(*prob);
        RoundLedger ledger;
        RngStream rng(0xc0);

        double e2 = kernels::nrm2sq(kernels::stepped(y, 1.0, ystar));
        double worst_ratio = 0.0;
        for (std::size_t t = 0; t < 100; ++t) {
            y = fedinn_round(*prob, {x, y}, subset, cfg, rng.fork(t), ledger);
            const double e2_next = kernels::nrm2sq(kernels::stepped(y, 1.0, ystar));
            const double ratio = e2_next / e2;
            if (ratio > worst_ratio) worst_ratio = ratio;
            e2 = e2_next;
        }
        const bool ok = worst_ratio <= limit;
        return {name, ok,
                "worst per-round squared-error ratio = " + fmt(worst_ratio) + " (limit " +
                    fmt(limit) + ", beta = " + fmt(cfg.beta) + ", tau = 4, 100 rounds)"};
    } catch (const std::exception& e) {
        return failed(name, e);
    }
}

CheckResult check_drift_separation() {
    const std::string name = "client-drift-separation";
    try {
        ProblemPtr prob = make_bilevel_quadratic(heterogeneous_bilevel_preset());
        InnerStepConfig cfg;
        cfg.beta = 0.5;
        cfg.tau = 10;
        const std::size_t rounds = 400;

        const ParamPair z0 = prob->initial_point();
        const std::vector<double> x = z0.x;
        const std::vector<double> ystar = prob->solve_inner(x);
        const std::vector<std::size_t> subset = all_clients(*prob);

        double corrected_e2 = 0.0, local_e2 = 0.0;
        for (int variant = 0; variant < 2; ++variant) {
            std::vector<double> y = z0.y;
            RoundLedger ledger;
            RngStream rng(0xd5);
            for (std::size_t t = 0; t < rounds; ++t) {
                const ParamPair z{x, y};
                y = variant == 0 ? fedinn_round(*prob, z, subset, cfg, rng.fork(t), ledger)
                                 : lfedinn_round(*prob, z, subset, cfg, rng.fork(t), ledger);
            }
            const double e2 = kernels::nrm2sq(kernels::stepped(y, 1.0, ystar));
            (variant == 0 ? corrected_e2 : local_e2) = e2;
        }
        const bool ok = corrected_e2 <= 1e-10 && local_e2 > 1e-3;
        return {name, ok,
                "variance-reduced limiting squared error = " + fmt(corrected_e2) +
                    " (limit 1e-10), local-only = " + fmt(local_e2) +
                    " (must exceed 1e-03); tau = 10, 400 rounds"};
    } catch (const std::exception& e) {
        return failed(name, e);
    }
}

std::vector<CheckResult> run_oracle_suite() {
    return {check_neumann_tail_bound(), check_hypergradient_bias(), check_hypergradient_fd(),
            check_inner_contraction(), check_drift_separation()};
}

bool all_passed(const std::vector<CheckResult>& results) {
    for (const CheckResult& r : results)
        if (!r.passed) return false;
    return true;
}

}  // namespace fednest
