#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "fednest/errors.hpp"
#include "fednest/kernels.hpp"
#include "fednest/linalg.hpp"
#include "fednest/outer.hpp"
#include "fednest/problems.hpp"
#include "fednest/rng.hpp"

using namespace fednest;
namespace k = fednest::kernels;

namespace {

bool bits_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

double dist(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> d(a.size());
    k::sub(a, b, d);
    return std::sqrt(k::nrm2sq(d));
}

std::vector<std::size_t> all_clients(const Problem& p) {
    std::vector<std::size_t> s(p.num_clients());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = i;
    return s;
}

// A nested quadratic whose clients agree at the outer optimum: every
// per-client outer gradient vanishes exactly at (x_hat, y*(x_hat)), making
// that point a bitwise fixed point of the corrected round.
ProblemPtr outer_homogeneous_bilevel(const std::vector<double>& x_hat) {
    const std::size_t m = 4, d1 = 3, d2 = 3;
    BilevelQuadraticData data;
    RngStream rng(71);
    for (std::size_t i = 0; i < m; ++i) {
        data.Q.push_back(linalg::random_spd(d2, 0.5, 2.0, rng.fork(2 * i), 0.05));
        Mat p(d2, d1);
        RngStream ps = rng.fork(2 * i + 1);
        ps.gaussian_fill(p.a.data(), p.a.size());
        const double nrm = linalg::spectral_norm(p);
        for (double& v : p.a) v *= 0.2 / nrm;
        data.P.push_back(std::move(p));
        data.c.push_back(RngStream(900 + i).gaussian_vec(d2));
        data.u.push_back(x_hat);
        data.a.push_back(std::vector<double>(d2, 0.0));  // placeholder
    }
    data.rho = 1.0;
    ProblemPtr draft = make_bilevel_quadratic(data);
    std::vector<double> ystar = draft->solve_inner(x_hat);
    for (auto& ai : data.a) ai = ystar;
    return make_bilevel_quadratic(data);
}

}  // namespace

TEST_CASE("the recentred saddle point is a bitwise fixed point of the corrected round") {
    // At the origin every per-client outer x-gradient is exactly zero, so the
    // guiding direction, the corrections and the local steps are all exact
    // zeros: one round returns the origin bit for bit.
    MinimaxQuadraticSpec spec;
    spec.m = 6;
    spec.d = 4;
    ProblemPtr p = make_minimax_quadratic(spec);
    ParamPair origin;
    origin.x.assign(p->dim_x(), 0.0);
    origin.y.assign(p->dim_y(), 0.0);

    OuterStepConfig cfg;
    cfg.alpha = 0.1;
    cfg.tau = 3;
    cfg.mode = ProblemKind::minimax;
    RoundLedger ledger;
    std::vector<double> next =
        fedout_round(*p, origin, all_clients(*p), cfg, IhgpConfig{}, RngStream(3), ledger);
    CHECK(bits_equal(next, origin.x));
}

TEST_CASE("an outer-homogeneous nested instance pins its optimum bitwise") {
    std::vector<double> x_hat = RngStream(55).gaussian_vec(3);
    ProblemPtr p = outer_homogeneous_bilevel(x_hat);
    ParamPair z;
    z.x = x_hat;
    z.y = p->solve_inner(x_hat);

    // All outer draws vanish at z: the chain seed, the surrogates and the
    // corrections are exact zeros regardless of tau or N.
    OuterStepConfig cfg;
    cfg.alpha = 0.2;
    cfg.tau = 4;
    cfg.mode = ProblemKind::bilevel;
    IhgpConfig ihgp;
    ihgp.N = 5;
    RoundLedger ledger;
    std::vector<double> next =
        fedout_round(*p, z, all_clients(*p), cfg, ihgp, RngStream(4), ledger);
    CHECK(bits_equal(next, x_hat));

    // The local variant sits still there too.
    std::vector<double> lnext =
        lfedout_round(*p, z, all_clients(*p), cfg, ihgp, RngStream(5), ledger);
    CHECK(bits_equal(lnext, x_hat));
}

TEST_CASE("corrected round internals replay from the declared streams") {
    MinimaxQuadraticSpec spec;
    spec.m = 5;
    spec.d = 3;
    spec.noise.sigma_f = 0.3;
    ProblemPtr p = make_minimax_quadratic(spec);
    ParamPair z = p->initial_point();
    std::vector<std::size_t> subset{0, 2, 4};
    OuterStepConfig cfg;
    cfg.alpha = 0.07;
    cfg.tau = 3;
    cfg.mode = ProblemKind::minimax;
    RngStream rng(101);
    RoundLedger ledger;
    std::vector<double> got =
        fedout_round(*p, z, subset, cfg, IhgpConfig{}, rng, ledger);

    // Replay: surrogate draws, their mean, then corrected local loops.
    const double alpha_i = cfg.local_step();
    std::vector<std::vector<double>> h_parts;
    for (std::size_t i : subset) {
        RngStream s = rng.fork(tag::client, i).fork(tag::purpose, purpose::surrogate);
        h_parts.push_back(p->sample_outer_grads(i, z, s).gx);
    }
    std::vector<double> h = k::pairwise_mean(h_parts);
    std::vector<std::vector<double>> parts;
    for (std::size_t i : subset) {
        RngStream ci = rng.fork(tag::client, i);
        ParamPair loc = z;
        for (std::size_t v = 0; v < cfg.tau; ++v) {
            RngStream s = ci.fork(tag::step, v).fork(tag::purpose, purpose::local_loop);
            std::vector<double> g_loc = p->sample_outer_grads(i, loc, s).gx;
            std::vector<double> g_anc = p->sample_outer_grads(i, z, s).gx;
            std::vector<double> dir = h;
            for (std::size_t j = 0; j < dir.size(); ++j) dir[j] += g_loc[j] - g_anc[j];
            k::axpy(-alpha_i, dir.data(), loc.x.data(), loc.x.size());
        }
        parts.push_back(loc.x);
    }
    CHECK(bits_equal(got, k::pairwise_mean(parts)));
}

TEST_CASE("both correction forms agree exactly without noise and differ with it") {
    MinimaxQuadraticSpec spec;
    spec.m = 4;
    spec.d = 3;
    ProblemPtr clean = make_minimax_quadratic(spec);
    spec.noise.sigma_f = 0.2;
    ProblemPtr noisy = make_minimax_quadratic(spec);

    OuterStepConfig shared;
    shared.alpha = 0.05;
    shared.tau = 4;
    shared.mode = ProblemKind::minimax;
    OuterStepConfig stale = shared;
    stale.correction = OuterCorrection::stale_anchor;

    // Noise off: the re-drawn anchor gradient and the stored round-start
    // estimate are the same exact vector, so the rounds match bitwise.
    ParamPair z = clean->initial_point();
    RoundLedger ledger;
    std::vector<double> a =
        fedout_round(*clean, z, all_clients(*clean), shared, IhgpConfig{}, RngStream(7), ledger);
    std::vector<double> b =
        fedout_round(*clean, z, all_clients(*clean), stale, IhgpConfig{}, RngStream(7), ledger);
    CHECK(bits_equal(a, b));

    // Noise on: the two anchor estimates use different draws.
    ParamPair zn = noisy->initial_point();
    std::vector<double> an =
        fedout_round(*noisy, zn, all_clients(*noisy), shared, IhgpConfig{}, RngStream(7), ledger);
    std::vector<double> bn =
        fedout_round(*noisy, zn, all_clients(*noisy), stale, IhgpConfig{}, RngStream(7), ledger);
    CHECK(!bits_equal(an, bn));
}

TEST_CASE("the composition surrogate is driven entirely by the transport oracle") {
    // Silence the Jacobian-vector oracle: the guiding direction collapses to
    // zero and the round cannot move (the direct part is identically zero).
    class SilentTransport final : public Problem {
    public:
        explicit SilentTransport(ProblemPtr base) : base_(std::move(base)) {}
        ProblemKind kind() const override { return base_->kind(); }
        std::size_t num_clients() const override { return base_->num_clients(); }
        std::size_t dim_x() const override { return base_->dim_x(); }
        std::size_t dim_y() const override { return base_->dim_y(); }
        const ProblemConstants& constants() const override { return base_->constants(); }
        const NoiseLevels& noise() const override { return base_->noise(); }
        std::vector<double> sample_inner_grad(std::size_t i, const ParamPair& z,
                                              RngStream rng) const override {
            return base_->sample_inner_grad(i, z, rng);
        }
        OuterGrads sample_outer_grads(std::size_t i, const ParamPair& z,
                                      RngStream rng) const override {
            return base_->sample_outer_grads(i, z, rng);
        }
        std::vector<double> sample_hessvec(std::size_t i, const ParamPair& z,
                                           const std::vector<double>& v,
                                           RngStream rng) const override {
            return base_->sample_hessvec(i, z, v, rng);
        }
        std::vector<double> sample_jacvec(std::size_t, const ParamPair&,
                                          const std::vector<double>&,
                                          RngStream) const override {
            return std::vector<double>(dim_x(), 0.0);
        }
        std::vector<double> solve_inner(const std::vector<double>& x) const override {
            return base_->solve_inner(x);
        }
        std::vector<double> analytic_hypergradient(const std::vector<double>& x) const override {
            return base_->analytic_hypergradient(x);
        }
        double outer_value(const std::vector<double>& x) const override {
            return base_->outer_value(x);
        }
        std::vector<double> optimum_x() const override { return base_->optimum_x(); }
        std::vector<double> optimum_y() const override { return base_->optimum_y(); }
        ParamPair initial_point() const override { return base_->initial_point(); }

    private:
        ProblemPtr base_;
    };

    CompositionalSpec spec;
    spec.m = 4;
    spec.d1 = 3;
    spec.d2 = 4;
    SilentTransport p(make_compositional(spec));
    ParamPair z = p.initial_point();
    OuterStepConfig cfg;
    cfg.alpha = 0.3;
    cfg.tau = 5;
    cfg.mode = ProblemKind::compositional;
    RoundLedger ledger;
    std::vector<double> next =
        fedout_compositional_round(p, z, all_clients(p), cfg, RngStream(9), ledger);
    CHECK(bits_equal(next, z.x));
}

TEST_CASE("composition rounds follow the assembled reduced gradient") {
    CompositionalSpec spec;
    spec.m = 4;
    spec.d1 = 3;
    spec.d2 = 4;
    ProblemPtr p = make_compositional(spec);
    ParamPair z = p->initial_point();
    z.y = p->solve_inner(z.x);
    OuterStepConfig cfg;
    cfg.alpha = 0.25;
    cfg.tau = 1;
    cfg.mode = ProblemKind::compositional;
    RoundLedger ledger;
    std::vector<double> next =
        fedout_compositional_round(*p, z, all_clients(*p), cfg, RngStream(10), ledger);

    // tau = 1, solved inner point, noise off: the move is exactly
    // -alpha * analytic reduced gradient, up to aggregation rounding.
    std::vector<double> want = z.x;
    k::axpy(-cfg.alpha, p->analytic_hypergradient(z.x), want);
    CHECK(dist(next, want) < 1e-13);
}

TEST_CASE("flat-mode rounds keep the client mean as their fixed point") {
    SingleLevelSpec spec;
    spec.m = 6;
    spec.d = 4;
    ProblemPtr p = make_single_level(spec);
    OuterStepConfig cfg;
    cfg.alpha = 0.5;
    cfg.tau = 4;
    cfg.mode = ProblemKind::single_level;
    RoundLedger ledger;

    // One round from the mean stays within aggregation rounding of it.
    std::vector<double> next =
        fedout_single_level_round(*p, p->optimum_x(), all_clients(*p), cfg, RngStream(11), ledger);
    CHECK(dist(next, p->optimum_x()) < 1e-14);

    // And iterating from the initial point converges to it.
    std::vector<double> x = p->initial_point().x;
    RngStream rng(12);
    for (int t = 0; t < 200; ++t)
        x = fedout_single_level_round(*p, x, all_clients(*p), cfg, rng.fork(t), ledger);
    CHECK(dist(x, p->optimum_x()) < 1e-12);
}

TEST_CASE("local-only rounds replay as per-client surrogate descent") {
    MinimaxQuadraticSpec spec;
    spec.m = 4;
    spec.d = 3;
    spec.noise.sigma_f = 0.25;
    ProblemPtr p = make_minimax_quadratic(spec);
    ParamPair z = p->initial_point();
    OuterStepConfig cfg;
    cfg.alpha = 0.06;
    cfg.tau = 2;
    cfg.mode = ProblemKind::minimax;
    RngStream rng(77);
    RoundLedger ledger;
    std::vector<double> got = lfedout_round(*p, z, all_clients(*p), cfg, IhgpConfig{}, rng, ledger);

    const double alpha_i = cfg.local_step();
    std::vector<std::vector<double>> parts;
    for (std::size_t i : all_clients(*p)) {
        RngStream ci = rng.fork(tag::client, i);
        ParamPair loc = z;
        for (std::size_t v = 0; v < cfg.tau; ++v) {
            std::vector<double> g =
                p->sample_outer_grads(i, loc,
                                      ci.fork(tag::step, v).fork(tag::purpose, purpose::outer_grads))
                    .gx;
            k::axpy(-alpha_i, g.data(), loc.x.data(), loc.x.size());
        }
        parts.push_back(loc.x);
    }
    CHECK(bits_equal(got, k::pairwise_mean(parts)));
}

TEST_CASE("round flavours charge their declared communication budgets") {
    const std::size_t N = 4;
    IhgpConfig ihgp;
    ihgp.N = N;

    BilevelQuadraticSpec bl;
    bl.m = 4;
    bl.d1 = 3;
    bl.d2 = 3;
    ProblemPtr pb = make_bilevel_quadratic(bl);
    ParamPair zb = pb->initial_point();
    OuterStepConfig cb;
    cb.mode = ProblemKind::bilevel;
    cb.tau = 2;
    {
        RoundLedger ledger;
        fedout_round(*pb, zb, all_clients(*pb), cb, ihgp, RngStream(1), ledger);
        CHECK(ledger.rounds() == N + 3);
        CHECK(ledger.samples().zeta_jac == pb->num_clients());
        // surrogate + per-step correction draws
        CHECK(ledger.samples().xi >= pb->num_clients() * (1 + cb.tau));
    }

    MinimaxQuadraticSpec mm;
    mm.m = 4;
    mm.d = 3;
    ProblemPtr pm = make_minimax_quadratic(mm);
    ParamPair zm = pm->initial_point();
    OuterStepConfig cm;
    cm.mode = ProblemKind::minimax;
    cm.tau = 2;
    {
        RoundLedger ledger;
        fedout_round(*pm, zm, all_clients(*pm), cm, ihgp, RngStream(1), ledger);
        CHECK(ledger.rounds() == 3);
    }

    CompositionalSpec cp;
    cp.m = 4;
    cp.d1 = 3;
    cp.d2 = 4;
    ProblemPtr pc = make_compositional(cp);
    ParamPair zc = pc->initial_point();
    OuterStepConfig cc;
    cc.mode = ProblemKind::compositional;
    {
        RoundLedger ledger;
        fedout_compositional_round(*pc, zc, all_clients(*pc), cc, RngStream(1), ledger);
        CHECK(ledger.rounds() == 1 + 3);
    }

    ProblemPtr ps = make_single_level(SingleLevelSpec{});
    OuterStepConfig cs;
    cs.mode = ProblemKind::single_level;
    {
        RoundLedger ledger;
        fedout_single_level_round(*ps, ps->initial_point().x, all_clients(*ps), cs, RngStream(1),
                                  ledger);
        CHECK(ledger.rounds() == 3);
    }

    {
        RoundLedger ledger;
        lfedout_round(*pm, zm, all_clients(*pm), cm, ihgp, RngStream(1), ledger);
        CHECK(ledger.rounds() == 1);
        CHECK(ledger.exchanges() == 1);
    }
}

TEST_CASE("outer round configuration is validated") {
    MinimaxQuadraticSpec mm;
    mm.m = 3;
    mm.d = 2;
    ProblemPtr pm = make_minimax_quadratic(mm);
    ParamPair z = pm->initial_point();
    RoundLedger ledger;
    IhgpConfig ihgp;

    OuterStepConfig cfg;
    cfg.mode = ProblemKind::bilevel;  // wrong kind for this problem
    CHECK_THROWS_AS(fedout_round(*pm, z, all_clients(*pm), cfg, ihgp, RngStream(1), ledger),
                    ValidationError);
    cfg.mode = ProblemKind::compositional;  // not a fedout_round mode at all
    CHECK_THROWS_AS(fedout_round(*pm, z, all_clients(*pm), cfg, ihgp, RngStream(1), ledger),
                    UnsupportedConfigError);
    cfg.mode = ProblemKind::minimax;
    cfg.alpha = 0.0;
    CHECK_THROWS_AS(fedout_round(*pm, z, all_clients(*pm), cfg, ihgp, RngStream(1), ledger),
                    ValidationError);
    cfg = OuterStepConfig{};
    cfg.mode = ProblemKind::minimax;
    CHECK_THROWS_AS(fedout_round(*pm, z, {}, cfg, ihgp, RngStream(1), ledger), ValidationError);
    CHECK_THROWS_AS(
        fedout_compositional_round(*pm, z, all_clients(*pm), cfg, RngStream(1), ledger),
        ValidationError);

    ParamPair bad = z;
    bad.x.push_back(0.0);
    CHECK_THROWS_AS(fedout_round(*pm, bad, all_clients(*pm), cfg, ihgp, RngStream(1), ledger),
                    ValidationError);
}

TEST_CASE("runaway outer stepsizes raise a divergence error naming the iterate") {
    MinimaxQuadraticSpec mm;
    mm.m = 3;
    mm.d = 2;
    ProblemPtr p = make_minimax_quadratic(mm);
    ParamPair z = p->initial_point();
    OuterStepConfig cfg;
    cfg.mode = ProblemKind::minimax;
    cfg.alpha = 1e9;
    cfg.tau = 4;
    RoundLedger ledger;
    try {
        RngStream rng(2);
        for (int t = 0; t < 64; ++t)
            z.x = fedout_round(*p, z, all_clients(*p), cfg, IhgpConfig{}, rng.fork(t), ledger);
        FAIL("expected a divergence error");
    } catch (const DivergenceError& e) {
        CHECK(std::string(e.which()).find("outer") != std::string::npos);
        CHECK(e.norm() > 1e12);
    }
}
