#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "fednest/errors.hpp"
#include "fednest/inner.hpp"
#include "fednest/kernels.hpp"
#include "fednest/problems.hpp"
#include "fednest/rng.hpp"

using namespace fednest;
namespace k = fednest::kernels;

namespace {

bool bits_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

double norm2sq(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> d(a.size());
    k::sub(a, b, d);
    return k::nrm2sq(d);
}

std::vector<std::size_t> all_clients(const Problem& p) {
    std::vector<std::size_t> s(p.num_clients());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = i;
    return s;
}

ProblemPtr noisy_bilevel() {
    BilevelQuadraticSpec spec;
    spec.m = 5;
    spec.d1 = 3;
    spec.d2 = 4;
    spec.noise.sigma_g1 = 0.4;
    return make_bilevel_quadratic(spec);
}

// The anchor gradient a corrected round aggregates, rebuilt from the
// documented stream layout.
std::vector<double> rebuild_anchor(const Problem& p, const ParamPair& z,
                                   const std::vector<std::size_t>& subset, RngStream rng) {
    std::vector<std::vector<double>> parts;
    for (std::size_t i : subset) {
        RngStream s = rng.fork(tag::client, i).fork(tag::purpose, purpose::anchor);
        parts.push_back(p.sample_inner_grad(i, z, s));
    }
    return k::pairwise_mean(parts);
}

}  // namespace

TEST_CASE("a tau=1 corrected round is exactly one global step, even under noise") {
    // With one local step the local and anchor evaluations share the iterate
    // AND the draw, so their difference is exactly zero and every client
    // moves by -beta * q. The aggregate must equal y - beta*q bit for bit.
    // (Client count a power of two: averaging identical vectors is exact.)
    BilevelQuadraticSpec spec;
    spec.m = 4;
    spec.d1 = 3;
    spec.d2 = 4;
    spec.noise.sigma_g1 = 0.4;
    ProblemPtr p = make_bilevel_quadratic(spec);
    ParamPair z = p->initial_point();
    InnerStepConfig cfg;
    cfg.beta = 0.05;
    cfg.tau = 1;
    RngStream rng(77);
    RoundLedger ledger;

    std::vector<double> got = fedinn_round(*p, z, all_clients(*p), cfg, rng, ledger);
    std::vector<double> q = rebuild_anchor(*p, z, all_clients(*p), rng);
    std::vector<double> want(z.y.size());
    for (std::size_t j = 0; j < want.size(); ++j) want[j] = z.y[j] - cfg.beta * q[j];
    CHECK(bits_equal(got, want));
}

TEST_CASE("corrected round internals replay from the declared streams") {
    ProblemPtr p = noisy_bilevel();
    ParamPair z = p->initial_point();
    std::vector<std::size_t> subset{1, 3};
    InnerStepConfig cfg;
    cfg.beta = 0.06;
    cfg.tau = 3;
    RngStream rng(123);
    RoundLedger ledger;
    std::vector<double> got = fedinn_round(*p, z, subset, cfg, rng, ledger);

    // Replay: anchor aggregate, then tau corrected steps per client with the
    // same draw at the moving and the anchored point.
    const double beta_i = cfg.local_step();
    std::vector<double> q = rebuild_anchor(*p, z, subset, rng);
    std::vector<std::vector<double>> parts;
    for (std::size_t i : subset) {
        ParamPair loc = z;
        for (std::size_t v = 0; v < cfg.tau; ++v) {
            RngStream s =
                rng.fork(tag::client, i).fork(tag::step, v).fork(tag::purpose, purpose::inner_grad);
            std::vector<double> g_loc = p->sample_inner_grad(i, loc, s);
            std::vector<double> g_anc = p->sample_inner_grad(i, z, s);
            for (std::size_t j = 0; j < loc.y.size(); ++j)
                loc.y[j] -= beta_i * (g_loc[j] - g_anc[j] + q[j]);
        }
        parts.push_back(loc.y);
    }
    CHECK(bits_equal(got, k::pairwise_mean(parts)));
}

TEST_CASE("an uncorrected round averages independent local trajectories") {
    ProblemPtr p = noisy_bilevel();
    ParamPair z = p->initial_point();
    InnerStepConfig cfg;
    cfg.beta = 0.06;
    cfg.tau = 2;
    RngStream rng(321);
    RoundLedger ledger;
    std::vector<double> got = lfedinn_round(*p, z, all_clients(*p), cfg, rng, ledger);

    const double beta_i = cfg.local_step();
    std::vector<std::vector<double>> parts;
    for (std::size_t i : all_clients(*p)) {
        ParamPair loc = z;
        for (std::size_t v = 0; v < cfg.tau; ++v) {
            RngStream s =
                rng.fork(tag::client, i).fork(tag::step, v).fork(tag::purpose, purpose::inner_grad);
            std::vector<double> g = p->sample_inner_grad(i, loc, s);
            for (std::size_t j = 0; j < loc.y.size(); ++j) loc.y[j] -= beta_i * g[j];
        }
        parts.push_back(loc.y);
    }
    CHECK(bits_equal(got, k::pairwise_mean(parts)));
}

TEST_CASE("the solved inner point is a numerical fixed point of corrected rounds") {
    BilevelQuadraticSpec spec;
    ProblemPtr p = make_bilevel_quadratic(spec);
    ParamPair z = p->initial_point();
    z.y = p->solve_inner(z.x);
    InnerStepConfig cfg;
    cfg.beta = 0.0625;
    cfg.tau = 4;
    RoundLedger ledger;
    std::vector<double> next = fedinn_round(*p, z, all_clients(*p), cfg, RngStream(5), ledger);
    CHECK(std::sqrt(norm2sq(next, z.y)) < 1e-12);
}

TEST_CASE("corrected rounds contract at the declared per-round rate") {
    ProblemPtr p = make_bilevel_quadratic(BilevelQuadraticSpec{});
    const double mu = p->constants().mu_g;
    InnerStepConfig cfg;
    cfg.beta = 1.0 / (8.0 * p->constants().l_g1);
    cfg.tau = 2;
    const double limit = 1.0 - cfg.beta * mu / 2.0 + 1e-12;

    ParamPair z = p->initial_point();
    std::vector<double> ystar = p->solve_inner(z.x);
    RngStream rng(17);
    RoundLedger ledger;
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
        const double before = norm2sq(z.y, ystar);
        z.y = fedinn_round(*p, z, all_clients(*p), cfg, rng.fork(t), ledger);
        const double after = norm2sq(z.y, ystar);
        if (before > 0.0) worst = std::max(worst, after / before);
    }
    CHECK(worst <= limit);
}

TEST_CASE("only the corrected round survives heterogeneous local loops") {
    // Many local steps on spread-apart clients: the uncorrected round drifts
    // toward the mean of the per-client optima and stalls at a plateau; the
    // corrected round still converges to the global inner optimum.
    ProblemPtr p = make_bilevel_quadratic(heterogeneous_bilevel_preset());
    InnerStepConfig cfg;
    cfg.beta = 0.5;
    cfg.tau = 10;
    ParamPair z0 = p->initial_point();
    std::vector<double> ystar = p->solve_inner(z0.x);
    RoundLedger ledger;

    ParamPair zc = z0, zu = z0;
    RngStream rng(31);
    for (int t = 0; t < 300; ++t) {
        zc.y = fedinn_round(*p, zc, all_clients(*p), cfg, rng.fork(2 * t), ledger);
        zu.y = lfedinn_round(*p, zu, all_clients(*p), cfg, rng.fork(2 * t + 1), ledger);
    }
    CHECK(norm2sq(zc.y, ystar) < 1e-10);
    CHECK(norm2sq(zu.y, ystar) > 1e-3);
}

TEST_CASE("oversized stepsizes raise a divergence error that names the iterate") {
    ProblemPtr p = make_bilevel_quadratic(BilevelQuadraticSpec{});
    ParamPair z = p->initial_point();
    InnerStepConfig cfg;
    cfg.beta = 1e9;
    cfg.tau = 8;
    RoundLedger ledger;
    try {
        // A single huge round cannot overflow; iterate a few.
        RngStream rng(9);
        for (int t = 0; t < 64; ++t) z.y = fedinn_round(*p, z, all_clients(*p), cfg, rng.fork(t), ledger);
        FAIL("expected a divergence error");
    } catch (const DivergenceError& e) {
        CHECK(std::string(e.which()).find("inner") != std::string::npos);
        CHECK(e.stepsize() > 0.0);
        CHECK(e.norm() > 1e12);
    }
}

TEST_CASE("round parameters are validated") {
    ProblemPtr p = make_bilevel_quadratic(BilevelQuadraticSpec{});
    ParamPair z = p->initial_point();
    RoundLedger ledger;
    InnerStepConfig cfg;

    CHECK_THROWS_AS(fedinn_round(*p, z, {}, cfg, RngStream(1), ledger), ValidationError);
    InnerStepConfig bad = cfg;
    bad.beta = 0.0;
    CHECK_THROWS_AS(fedinn_round(*p, z, {0}, bad, RngStream(1), ledger), ValidationError);
    bad = cfg;
    bad.tau = 0;
    CHECK_THROWS_AS(lfedinn_round(*p, z, {0}, bad, RngStream(1), ledger), ValidationError);
    CHECK_THROWS_AS(fedinn_round(*p, z, {p->num_clients()}, cfg, RngStream(1), ledger),
                    ValidationError);
}

TEST_CASE("rounds charge the ledger for their communication and samples") {
    ProblemPtr p = noisy_bilevel();
    ParamPair z = p->initial_point();
    InnerStepConfig cfg;
    cfg.beta = 0.01;
    cfg.tau = 3;
    std::vector<std::size_t> subset{0, 2, 4};

    RoundLedger a;
    fedinn_round(*p, z, subset, cfg, RngStream(1), a);
    CHECK(a.rounds() == 2);  // anchor aggregate + iterate aggregate
    CHECK(a.exchanges() == 2);
    CHECK(a.samples().zeta_grad == subset.size() * (1 + cfg.tau));
    CHECK(a.samples().xi == 0);

    RoundLedger b;
    lfedinn_round(*p, z, subset, cfg, RngStream(1), b);
    CHECK(b.rounds() == 1);
    CHECK(b.exchanges() == 1);
    CHECK(b.samples().zeta_grad == subset.size() * cfg.tau);
}
