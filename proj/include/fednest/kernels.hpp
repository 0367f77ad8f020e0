#pragma once

// Dense double-precision kernels used by the federated simulation loops.
//
// Two implementations exist for every primitive: a scalar reference and an
// AVX2 variant. Which one runs is decided once at startup from CPU features
// (or forced via force_backend, e.g. by the equivalence tests or the CLI's
// --kernels flag). Both variants are bit-identical by construction:
//   * element-wise ops round identically lane by lane (mul+add, no FMA),
//   * reductions keep four stride-4 accumulators and combine them as
//     (acc0+acc2) + (acc1+acc3), the same order the AVX2 horizontal sum
//     produces, with the tail added sequentially afterwards.
// The build compiles everything with -ffp-contract=off so the compiler cannot
// fuse a multiply-add in one translation unit and not the other.

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace fednest::kernels {

enum class Backend : std::uint8_t { scalar = 0, avx2 = 1 };

// Backend currently wired into the dispatch table.
Backend active_backend();
std::string_view backend_name(Backend b);

// True if this machine can run the given backend.
bool backend_available(Backend b);

// Pin the dispatch table to one backend. Throws std::invalid_argument if the
// backend is not available on this CPU.
void force_backend(Backend b);

// Return to CPU auto-detection (prefers AVX2 when available).
void reset_backend();

// y[i] += a * x[i]
void axpy(double a, const double* x, double* y, std::size_t n);

// dst[i] = x[i] - a * g[i]   (one descent step; dst may alias x)
void step(const double* x, double a, const double* g, double* dst, std::size_t n);

// dst[i] = a[i] + b[i] / dst[i] = a[i] - b[i]  (dst may alias either input)
void add(const double* a, const double* b, double* dst, std::size_t n);
void sub(const double* a, const double* b, double* dst, std::size_t n);

// x[i] *= a
void scale(double* x, double a, std::size_t n);

// Reductions; both use the fixed 4-accumulator association described above.
double dot(const double* a, const double* b, std::size_t n);
double nrm2sq(const double* a, std::size_t n);

// out = A v with A row-major (rows x cols): out[r] = dot(row r, v).
void matvec(const double* A, std::size_t rows, std::size_t cols,
            const double* v, double* out);

// out = A^T v: out[c] = sum_r A[r,c] v[r], computed as axpy over rows so the
// accumulation order (and hence the rounding) never depends on backend.
void matvec_t(const double* A, std::size_t rows, std::size_t cols,
              const double* v, double* out);

// ---- std::vector conveniences (thin wrappers over the pointer API) --------

inline void axpy(double a, const std::vector<double>& x, std::vector<double>& y) {
    axpy(a, x.data(), y.data(), y.size());
}
inline std::vector<double> stepped(const std::vector<double>& x, double a,
                                   const std::vector<double>& g) {
    std::vector<double> out(x.size());
    step(x.data(), a, g.data(), out.data(), x.size());
    return out;
}
inline void add(const std::vector<double>& a, const std::vector<double>& b,
                std::vector<double>& dst) {
    add(a.data(), b.data(), dst.data(), dst.size());
}
inline void sub(const std::vector<double>& a, const std::vector<double>& b,
                std::vector<double>& dst) {
    sub(a.data(), b.data(), dst.data(), dst.size());
}
inline void scale(std::vector<double>& x, double a) { scale(x.data(), a, x.size()); }
inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    return dot(a.data(), b.data(), a.size());
}
inline double nrm2sq(const std::vector<double>& a) { return nrm2sq(a.data(), a.size()); }

// Mean of equally weighted client vectors, accumulated by pairwise (binary
// tree) summation over the given fixed ordering. Pairwise keeps the rounding
// independent of how the per-client work was scheduled and is the one place
// aggregation happens, so every algorithm inherits the same associativity.
std::vector<double> pairwise_mean(const std::vector<std::vector<double>>& vs);

}  // namespace fednest::kernels
