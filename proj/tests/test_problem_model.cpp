#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "fednest/kernels.hpp"
#include "fednest/linalg.hpp"
#include "fednest/problems.hpp"
#include "fednest/rng.hpp"

using namespace fednest;
namespace k = fednest::kernels;

namespace {

bool bits_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

double err_norm(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> d(a.size());
    k::sub(a, b, d);
    return std::sqrt(k::nrm2sq(d));
}

NoiseLevels noisy() {
    NoiseLevels n;
    n.sigma_f = 0.3;
    n.sigma_g1 = 0.2;
    n.sigma_g2 = 0.1;
    return n;
}

// One instance per family, sharing a seed, with configurable noise.
std::vector<ProblemPtr> zoo(const NoiseLevels& n) {
    MinimaxQuadraticSpec mm;
    mm.m = 6;
    mm.d = 4;
    mm.noise = n;
    BilevelQuadraticSpec bl;
    bl.m = 5;
    bl.d1 = 3;
    bl.d2 = 4;
    bl.noise = n;
    CompositionalSpec cp;
    cp.m = 5;
    cp.d1 = 3;
    cp.d2 = 4;
    cp.noise = n;
    SingleLevelSpec sl;
    sl.m = 5;
    sl.d = 4;
    sl.noise = n;
    return {make_minimax_quadratic(mm), make_bilevel_quadratic(bl), make_compositional(cp),
            make_single_level(sl)};
}

ParamPair probe_at(const Problem& p, std::uint64_t salt) {
    RngStream rng(1234u + salt);
    ParamPair z;
    z.x = rng.fork('x').gaussian_vec(p.dim_x());
    z.y = rng.fork('y').gaussian_vec(p.dim_y());
    return z;
}

// Mean inner Hessian at z, recovered column by column through the
// matrix-vector oracle with noise off.
Mat mean_hess(const Problem& p, const ParamPair& z) {
    const std::size_t d = p.dim_y();
    Mat h(d, d);
    RngStream rng(7);
    for (std::size_t c = 0; c < d; ++c) {
        std::vector<double> e(d, 0.0);
        e[c] = 1.0;
        std::vector<std::vector<double>> cols;
        for (std::size_t i = 0; i < p.num_clients(); ++i)
            cols.push_back(p.sample_hessvec(i, z, e, rng.fork(i)));
        std::vector<double> col = k::pairwise_mean(cols);
        for (std::size_t r = 0; r < d; ++r) h.at(r, c) = col[r];
    }
    return h;
}

// Assemble the reduced gradient at x purely from the sampling oracles (noise
// off): direct part plus the cross-derivative applied to the solved inner
// linear system.
std::vector<double> assemble_hypergrad(const Problem& p, const std::vector<double>& x) {
    ParamPair z;
    z.x = x;
    z.y = p.solve_inner(x);
    RngStream rng(11);
    std::vector<std::vector<double>> gxs, gys;
    for (std::size_t i = 0; i < p.num_clients(); ++i) {
        OuterGrads g = p.sample_outer_grads(i, z, rng.fork(i));
        gxs.push_back(g.gx);
        gys.push_back(g.gy);
    }
    std::vector<double> grad = k::pairwise_mean(gxs);
    if (p.dim_y() == 0) return grad;
    std::vector<double> gybar = k::pairwise_mean(gys);
    std::vector<double> ideal = linalg::solve_spd(mean_hess(p, z), gybar);
    std::vector<std::vector<double>> jv;
    for (std::size_t i = 0; i < p.num_clients(); ++i)
        jv.push_back(p.sample_jacvec(i, z, ideal, rng.fork(1000 + i)));
    std::vector<double> indirect = k::pairwise_mean(jv);
    k::axpy(-1.0, indirect, grad);
    return grad;
}

}  // namespace

TEST_CASE("oracles are deterministic in the stream and leave it unchanged") {
    for (const ProblemPtr& p : zoo(noisy())) {
        ParamPair z = probe_at(*p, 0);
        RngStream rng(42);
        for (std::size_t i = 0; i < p->num_clients(); ++i) {
            if (p->dim_y() > 0) {
                CHECK(bits_equal(p->sample_inner_grad(i, z, rng), p->sample_inner_grad(i, z, rng)));
                std::vector<double> v = RngStream(5).gaussian_vec(p->dim_y());
                CHECK(bits_equal(p->sample_hessvec(i, z, v, rng), p->sample_hessvec(i, z, v, rng)));
                CHECK(bits_equal(p->sample_jacvec(i, z, v, rng), p->sample_jacvec(i, z, v, rng)));
            }
            OuterGrads a = p->sample_outer_grads(i, z, rng);
            OuterGrads b = p->sample_outer_grads(i, z, rng);
            CHECK(bits_equal(a.gx, b.gx));
            CHECK(bits_equal(a.gy, b.gy));
        }
    }
}

TEST_CASE("zero-noise instances expose exact oracles") {
    for (const ProblemPtr& p : zoo(NoiseLevels{})) {
        if (p->dim_y() == 0) continue;
        // At the solved inner point the averaged inner gradient vanishes.
        ParamPair z = probe_at(*p, 1);
        z.y = p->solve_inner(z.x);
        RngStream rng(3);
        std::vector<std::vector<double>> gs;
        for (std::size_t i = 0; i < p->num_clients(); ++i)
            gs.push_back(p->sample_inner_grad(i, z, rng.fork(i)));
        std::vector<double> mean = k::pairwise_mean(gs);
        CHECK(std::sqrt(k::nrm2sq(mean)) < 1e-11);
    }
}

TEST_CASE("a shared draw evaluated at two points differs by the exact difference") {
    // Additive gradient noise depends on the stream, not the evaluation
    // point, so re-running one stream at two points cancels it exactly.
    std::vector<ProblemPtr> noisy_zoo = zoo(noisy());
    std::vector<ProblemPtr> clean_zoo = zoo(NoiseLevels{});
    for (std::size_t f = 0; f < noisy_zoo.size(); ++f) {
        const Problem& pn = *noisy_zoo[f];
        const Problem& pc = *clean_zoo[f];
        ParamPair z1 = probe_at(pn, 2);
        ParamPair z2 = probe_at(pn, 3);
        RngStream rng(99);
        for (std::size_t i = 0; i < pn.num_clients(); ++i) {
            RngStream s = rng.fork(i);
            if (pn.dim_y() > 0) {
                std::vector<double> d1 = pn.sample_inner_grad(i, z1, s);
                k::axpy(-1.0, pn.sample_inner_grad(i, z2, s), d1);
                std::vector<double> d2 = pc.sample_inner_grad(i, z1, s);
                k::axpy(-1.0, pc.sample_inner_grad(i, z2, s), d2);
                CHECK(err_norm(d1, d2) < 1e-12);
            }
            OuterGrads a1 = pn.sample_outer_grads(i, z1, s);
            OuterGrads a2 = pn.sample_outer_grads(i, z2, s);
            OuterGrads b1 = pc.sample_outer_grads(i, z1, s);
            OuterGrads b2 = pc.sample_outer_grads(i, z2, s);
            k::axpy(-1.0, a2.gx, a1.gx);
            k::axpy(-1.0, b2.gx, b1.gx);
            k::axpy(-1.0, a2.gy, a1.gy);
            k::axpy(-1.0, b2.gy, b1.gy);
            CHECK(err_norm(a1.gx, b1.gx) < 1e-12);
            CHECK(err_norm(a1.gy, b1.gy) < 1e-12);
        }
    }
}

TEST_CASE("noisy draws are unbiased around the exact oracle") {
    std::vector<ProblemPtr> noisy_zoo = zoo(noisy());
    std::vector<ProblemPtr> clean_zoo = zoo(NoiseLevels{});
    const std::size_t reps = 20000;
    for (std::size_t f = 0; f < noisy_zoo.size(); ++f) {
        const Problem& pn = *noisy_zoo[f];
        const Problem& pc = *clean_zoo[f];
        if (pn.dim_y() == 0) continue;
        ParamPair z = probe_at(pn, 4);
        RngStream rng(17);
        std::vector<double> acc(pn.dim_y(), 0.0);
        for (std::size_t r = 0; r < reps; ++r)
            k::axpy(1.0, pn.sample_inner_grad(0, z, rng.fork(r)), acc);
        k::scale(acc, 1.0 / static_cast<double>(reps));
        std::vector<double> exact = pc.sample_inner_grad(0, z, rng);
        // 5-sigma band on the Monte Carlo mean, per coordinate.
        const double band = 5.0 * 0.2 / std::sqrt(static_cast<double>(reps));
        for (std::size_t j = 0; j < acc.size(); ++j)
            CHECK(std::abs(acc[j] - exact[j]) < band);
    }
}

TEST_CASE("noisy gradient draws have the declared variance") {
    MinimaxQuadraticSpec mm;
    mm.m = 4;
    mm.d = 3;
    mm.noise = noisy();
    ProblemPtr p = make_minimax_quadratic(mm);
    ParamPair z = probe_at(*p, 5);
    RngStream rng(23);
    const std::size_t reps = 20000;
    double mean = 0.0, sq = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
        double v = p->sample_inner_grad(1, z, rng.fork(r))[0];
        mean += v;
        sq += v * v;
    }
    mean /= static_cast<double>(reps);
    double var = sq / static_cast<double>(reps) - mean * mean;
    const double s2 = 0.2 * 0.2;
    CHECK(std::abs(var - s2) < 0.1 * s2);
}

TEST_CASE("matrix-vector oracles stay linear in v for a fixed stream") {
    for (const ProblemPtr& p : zoo(noisy())) {
        if (p->dim_y() == 0) continue;
        ParamPair z = probe_at(*p, 6);
        RngStream base(31);
        std::vector<double> v = base.fork('v').gaussian_vec(p->dim_y());
        std::vector<double> w = base.fork('w').gaussian_vec(p->dim_y());
        std::vector<double> lin(p->dim_y(), 0.0);
        k::axpy(0.7, v, lin);
        k::axpy(-1.3, w, lin);
        for (std::size_t i = 0; i < p->num_clients(); ++i) {
            RngStream s = base.fork(i);
            std::vector<double> hv = p->sample_hessvec(i, z, v, s);
            std::vector<double> hw = p->sample_hessvec(i, z, w, s);
            std::vector<double> hlin = p->sample_hessvec(i, z, lin, s);
            std::vector<double> combo(hv.size(), 0.0);
            k::axpy(0.7, hv, combo);
            k::axpy(-1.3, hw, combo);
            CHECK(err_norm(hlin, combo) < 1e-10);
            // Symmetry of the perturbed operator: v' H w == w' H v.
            CHECK(std::abs(k::dot(v, hw) - k::dot(w, hv)) < 1e-10);

            std::vector<double> jv = p->sample_jacvec(i, z, v, s);
            std::vector<double> jw = p->sample_jacvec(i, z, w, s);
            std::vector<double> jlin = p->sample_jacvec(i, z, lin, s);
            std::vector<double> jcombo(jv.size(), 0.0);
            k::axpy(0.7, jv, jcombo);
            k::axpy(-1.3, jw, jcombo);
            CHECK(err_norm(jlin, jcombo) < 1e-10);
        }
    }
}

TEST_CASE("oracle assembly reproduces the analytic reduced gradient") {
    for (const ProblemPtr& p : zoo(NoiseLevels{})) {
        for (std::uint64_t pt = 0; pt < 3; ++pt) {
            std::vector<double> x = RngStream(60 + pt).gaussian_vec(p->dim_x());
            std::vector<double> want = p->analytic_hypergradient(x);
            std::vector<double> got = assemble_hypergrad(*p, x);
            CHECK(err_norm(want, got) < 1e-9);
        }
    }
}

TEST_CASE("initial point is deterministic with the declared shapes") {
    for (const ProblemPtr& p : zoo(noisy())) {
        ParamPair a = p->initial_point();
        ParamPair b = p->initial_point();
        CHECK(a.x.size() == p->dim_x());
        CHECK(a.y.size() == p->dim_y());
        CHECK(bits_equal(a.x, b.x));
        CHECK(bits_equal(a.y, b.y));
    }
}

TEST_CASE("declared constants are coherent") {
    for (const ProblemPtr& p : zoo(NoiseLevels{})) {
        const ProblemConstants& c = p->constants();
        if (p->dim_y() > 0) {
            CHECK(c.mu_g > 0.0);
            CHECK(c.l_g1 >= c.mu_g);
            CHECK(c.kappa_g() >= 1.0);
        }
        CHECK(c.l_f1 > 0.0);
        CHECK(c.l_f0 > 0.0);
        CHECK(p->noise().all_zero());
    }
}
