#include "fednest/kernels.hpp"

#include <atomic>
#include <stdexcept>

#include "kernels_detail.hpp"

namespace fednest::kernels {
namespace {

// ---- scalar reference ------------------------------------------------------
//
// The reductions deliberately keep four stride-4 accumulators and combine them
// as (acc0+acc2)+(acc1+acc3): that is exactly the rounding sequence of the
// AVX2 loop (vector accumulator, extract high 128, add, then add the two
// remaining lanes). Keeping the association identical is what makes the two
// backends bit-exact interchangeable.

void scalar_axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + a * x[i];
}

void scalar_step(const double* x, double a, const double* g, double* dst, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = x[i] - a * g[i];
}

void scalar_add(const double* a, const double* b, double* dst, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] + b[i];
}

void scalar_sub(const double* a, const double* b, double* dst, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] - b[i];
}

void scalar_scale(double* x, double a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] = x[i] * a;
}

double scalar_dot(const double* a, const double* b, std::size_t n) {
    double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = acc0 + a[i + 0] * b[i + 0];
        acc1 = acc1 + a[i + 1] * b[i + 1];
        acc2 = acc2 + a[i + 2] * b[i + 2];
        acc3 = acc3 + a[i + 3] * b[i + 3];
    }
    double s = (acc0 + acc2) + (acc1 + acc3);
    for (; i < n; ++i) s = s + a[i] * b[i];
    return s;
}

double scalar_nrm2sq(const double* a, std::size_t n) {
    double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = acc0 + a[i + 0] * a[i + 0];
        acc1 = acc1 + a[i + 1] * a[i + 1];
        acc2 = acc2 + a[i + 2] * a[i + 2];
        acc3 = acc3 + a[i + 3] * a[i + 3];
    }
    double s = (acc0 + acc2) + (acc1 + acc3);
    for (; i < n; ++i) s = s + a[i] * a[i];
    return s;
}

// ---- dispatch --------------------------------------------------------------

struct Table {
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*step)(const double*, double, const double*, double*, std::size_t);
    void (*add)(const double*, const double*, double*, std::size_t);
    void (*sub)(const double*, const double*, double*, std::size_t);
    void (*scale)(double*, double, std::size_t);
    double (*dot)(const double*, const double*, std::size_t);
    double (*nrm2sq)(const double*, std::size_t);
};

constexpr Table kScalarTable{scalar_axpy, scalar_step, scalar_add, scalar_sub,
                             scalar_scale, scalar_dot, scalar_nrm2sq};

#ifdef FEDNEST_HAVE_AVX2
constexpr Table kAvx2Table{detail::avx2_axpy, detail::avx2_step, detail::avx2_add,
                           detail::avx2_sub,  detail::avx2_scale, detail::avx2_dot,
                           detail::avx2_nrm2sq};
#endif

bool cpu_has_avx2() {
#if defined(FEDNEST_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2") != 0;
#else
    return false;
#endif
}

Backend detect_backend() { return cpu_has_avx2() ? Backend::avx2 : Backend::scalar; }

std::atomic<Backend> g_backend{detect_backend()};

const Table& table_for(Backend b) {
#ifdef FEDNEST_HAVE_AVX2
    if (b == Backend::avx2) return kAvx2Table;
#else
    (void)b;
#endif
    return kScalarTable;
}

const Table& table() { return table_for(g_backend.load(std::memory_order_relaxed)); }

}  // namespace

Backend active_backend() { return g_backend.load(std::memory_order_relaxed); }

std::string_view backend_name(Backend b) {
    switch (b) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
    }
    return "unknown";
}

bool backend_available(Backend b) {
    if (b == Backend::scalar) return true;
    return cpu_has_avx2();
}

void force_backend(Backend b) {
    if (!backend_available(b))
        throw std::invalid_argument("kernel backend not available on this cpu: " +
                                    std::string(backend_name(b)));
    g_backend.store(b, std::memory_order_relaxed);
}

void reset_backend() { g_backend.store(detect_backend(), std::memory_order_relaxed); }

void axpy(double a, const double* x, double* y, std::size_t n) { table().axpy(a, x, y, n); }
void step(const double* x, double a, const double* g, double* dst, std::size_t n) {
    table().step(x, a, g, dst, n);
}
void add(const double* a, const double* b, double* dst, std::size_t n) {
    table().add(a, b, dst, n);
}
void sub(const double* a, const double* b, double* dst, std::size_t n) {
    table().sub(a, b, dst, n);
}
void scale(double* x, double a, std::size_t n) { table().scale(x, a, n); }
double dot(const double* a, const double* b, std::size_t n) { return table().dot(a, b, n); }
double nrm2sq(const double* a, std::size_t n) { return table().nrm2sq(a, n); }

void matvec(const double* A, std::size_t rows, std::size_t cols, const double* v,
            double* out) {
    for (std::size_t r = 0; r < rows; ++r) out[r] = dot(A + r * cols, v, cols);
}

void matvec_t(const double* A, std::size_t rows, std::size_t cols, const double* v,
              double* out) {
    for (std::size_t c = 0; c < cols; ++c) out[c] = 0.0;
    for (std::size_t r = 0; r < rows; ++r) axpy(v[r], A + r * cols, out, cols);
}

std::vector<double> pairwise_mean(const std::vector<std::vector<double>>& vs) {
    if (vs.empty()) return {};
    // Binary-tree sum over the given order: the result does not change when the
    // per-client vectors were produced in a different schedule, because the
    // combination order is a pure function of the index range.
    struct Rec {
        const std::vector<std::vector<double>>& vs;
        std::vector<double> sum(std::size_t lo, std::size_t hi) const {
            if (hi - lo == 1) return vs[lo];
            const std::size_t mid = lo + (hi - lo) / 2;
            std::vector<double> left = sum(lo, mid);
            const std::vector<double> right = sum(mid, hi);
            add(left, right, left);
            return left;
        }
    };
    std::vector<double> total = Rec{vs}.sum(0, vs.size());
    scale(total, 1.0 / static_cast<double>(vs.size()));
    return total;
}

}  // namespace fednest::kernels
