#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "fednest/rng.hpp"

using namespace fednest;

TEST_CASE("identical path => identical draws") {
    auto make = [] {
        return RngStream(42)
            .fork(tag::epoch, 3)
            .fork(tag::inner, 1)
            .fork(tag::client, 17)
            .fork(tag::step, 5)
            .fork(tag::purpose, purpose::inner_grad);
    };
    RngStream a = make(), b = make();
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    // Copies replay: the same draw can be consumed twice.
    RngStream c = make();
    RngStream d = c;  // value copy
    std::vector<double> g1(8), g2(8);
    c.gaussian_fill(g1.data(), 8);
    d.gaussian_fill(g2.data(), 8);
    CHECK(g1 == g2);
}

TEST_CASE("sibling paths differ and draw order is path-only") {
    RngStream root(7);
    // Clients forked in different iteration orders give identical per-client
    // streams: nothing about the draw depends on who went first.
    std::vector<std::uint64_t> forward, backward;
    for (std::size_t i = 0; i < 10; ++i) forward.push_back(root.fork(tag::client, i).next_u64());
    for (std::size_t i = 10; i-- > 0;) backward.push_back(root.fork(tag::client, i).next_u64());
    for (std::size_t i = 0; i < 10; ++i) CHECK(forward[i] == backward[9 - i]);

    // No collisions across a decent span of client/step indices.
    std::set<std::uint64_t> seen;
    for (std::size_t i = 0; i < 64; ++i)
        for (std::size_t v = 0; v < 64; ++v)
            seen.insert(root.fork(tag::client, i).fork(tag::step, v).next_u64());
    CHECK(seen.size() == 64 * 64);

    // Tag matters: client 3 and step 3 are different branches.
    CHECK(root.fork(tag::client, 3).next_u64() != root.fork(tag::step, 3).next_u64());

    // Seed matters.
    CHECK(RngStream(1).next_u64() != RngStream(2).next_u64());
}

TEST_CASE("uniform_below is in range and covers all residues") {
    RngStream rng(99);
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 7000; ++i) {
        const auto u = rng.uniform_below(7);
        REQUIRE(u < 7);
        ++counts[static_cast<std::size_t>(u)];
    }
    // Expect ~1000 each; a 5-sigma band for a binomial(7000, 1/7) is ~±150.
    for (int c : counts) CHECK(std::abs(c - 1000) < 200);
    CHECK(rng.uniform_below(1) == 0);
    CHECK(rng.uniform_below(0) == 0);
}

TEST_CASE("gaussian moments") {
    RngStream rng(2024);
    const int n = 200000;
    double s1 = 0.0, s2 = 0.0, s3 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double g = rng.gaussian();
        s1 += g;
        s2 += g * g;
        s3 += g * g * g;
    }
    const double mean = s1 / n, var = s2 / n - mean * mean, skew = s3 / n;
    // 5-sigma Monte-Carlo bands.
    CHECK(std::abs(mean) < 5.0 / std::sqrt(double(n)));
    CHECK(std::abs(var - 1.0) < 5.0 * std::sqrt(2.0 / double(n)));
    CHECK(std::abs(skew) < 5.0 * std::sqrt(15.0 / double(n)));
}

TEST_CASE("independence across sibling purposes") {
    // Correlation between streams that share every path component except the
    // purpose word should be at Monte-Carlo noise level.
    RngStream base = RngStream(5).fork(tag::epoch, 2).fork(tag::client, 3);
    RngStream a = base.fork(tag::purpose, purpose::inner_grad);
    RngStream b = base.fork(tag::purpose, purpose::outer_grads);
    const int n = 100000;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = a.gaussian(), y = b.gaussian();
        sab += x * y;
        saa += x * x;
        sbb += y * y;
    }
    const double corr = sab / std::sqrt(saa * sbb);
    CHECK(std::abs(corr) < 5.0 / std::sqrt(double(n)));
}

TEST_CASE("sample_without_replacement: distinct, sorted, in range") {
    RngStream rng(31337);
    for (int rep = 0; rep < 50; ++rep) {
        const auto s = rng.sample_without_replacement(20, 7);
        REQUIRE(s.size() == 7);
        for (std::size_t j = 0; j < s.size(); ++j) {
            CHECK(s[j] < 20);
            if (j) CHECK(s[j] > s[j - 1]);  // sorted and distinct
        }
    }
    // k >= m returns everything.
    const auto all = rng.sample_without_replacement(5, 9);
    CHECK(all == std::vector<std::size_t>{0, 1, 2, 3, 4});
}
