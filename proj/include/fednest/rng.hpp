#pragma once

// Counter-based splittable random streams.
//
// Every random quantity in the simulator is drawn from a stream addressed by
// an explicit path: (seed, epoch k, inner round t, client i, local step v,
// purpose). Forking folds one 64-bit word into the key with a full-avalanche
// mixer; drawing applies the same mixer in counter mode. Consequences the
// engine relies on:
//   * identical (seed, path) => identical draw sequence, regardless of which
//     order clients were simulated in;
//   * a draw can be replayed at two evaluation points by copying the stream
//     (streams are small value types) — this is how the variance-reduction
//     corrections evaluate the same sample at the local and the anchor point;
//   * distinct paths give statistically independent streams.
//
// <random> distributions are deliberately not used: their output is
// implementation-defined, which would break byte-identical traces across
// standard libraries. Uniform and Gaussian conversion is spelled out here.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace fednest {

// SplitMix64 finalizer: bijective, full avalanche.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Path tags. Values are part of the stream addressing scheme; changing them
// changes every trace, so they are fixed constants, not an enum that might be
// reordered casually.
namespace tag {
inline constexpr std::uint64_t epoch = 0x01;    // outer epoch k
inline constexpr std::uint64_t inner = 0x02;    // inner round t
inline constexpr std::uint64_t client = 0x03;   // client id i
inline constexpr std::uint64_t step = 0x04;     // local step v
inline constexpr std::uint64_t purpose = 0x05;  // which oracle / which draw
inline constexpr std::uint64_t term = 0x06;     // Neumann term index n
inline constexpr std::uint64_t outer = 0x07;    // the per-epoch outer round
}  // namespace tag

// Purpose words (folded after tag::purpose).
namespace purpose {
inline constexpr std::uint64_t inner_grad = 0x10;
inline constexpr std::uint64_t outer_grads = 0x11;
inline constexpr std::uint64_t hessvec = 0x12;
inline constexpr std::uint64_t jacvec = 0x13;
inline constexpr std::uint64_t anchor = 0x14;       // round-start anchor draws
inline constexpr std::uint64_t truncation = 0x15;   // Neumann truncation N'
inline constexpr std::uint64_t subset = 0x16;       // client participation
inline constexpr std::uint64_t init = 0x17;         // iterate initialisation
inline constexpr std::uint64_t ihgp = 0x18;         // inverse-Hessian product chain
inline constexpr std::uint64_t surrogate = 0x19;    // round-start hypergradient draws
inline constexpr std::uint64_t local_loop = 0x1a;   // client-local update loops
}  // namespace purpose

class RngStream {
public:
    RngStream() : key_(0) {}
    explicit RngStream(std::uint64_t seed) : key_(mix64(seed ^ 0x5eedba5eULL)) {}

    // Derive the stream for one branch of the path. Cheap value semantics:
    // fork freely, copy freely.
    [[nodiscard]] RngStream fork(std::uint64_t word) const {
        RngStream s;
        s.key_ = mix64(key_ ^ mix64(word));
        return s;
    }
    [[nodiscard]] RngStream fork(std::uint64_t t, std::uint64_t value) const {
        return fork(mix64(t) ^ value);
    }

    std::uint64_t next_u64() { return mix64(key_ + 0x9e3779b97f4a7c15ULL * (++ctr_)); }

    // Uniform on [0,1): top 53 bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer on {0, ..., n-1} by rejection (exact, unbiased).
    std::uint64_t uniform_below(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        for (;;) {
            const std::uint64_t u = next_u64();
            if (u < limit) return u % n;
        }
    }

    // Standard normal via Box-Muller (cosine branch). u1 is mapped into (0,1]
    // so the log never sees zero.
    double gaussian() {
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

    void gaussian_fill(double* dst, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) dst[i] = gaussian();
    }
    std::vector<double> gaussian_vec(std::size_t n) {
        std::vector<double> v(n);
        gaussian_fill(v.data(), n);
        return v;
    }

    // Draw k distinct indices from {0,...,m-1}, ascending (partial
    // Fisher-Yates on an index vector, then sorted). Used for participation.
    std::vector<std::size_t> sample_without_replacement(std::size_t m, std::size_t k);

private:
    std::uint64_t key_;
    std::uint64_t ctr_ = 0;
};

}  // namespace fednest
