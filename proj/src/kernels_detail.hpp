#pragma once

// Internal: AVX2 kernel entry points, compiled in kernels_avx2.cpp with
// -mavx2. Only referenced when FEDNEST_HAVE_AVX2 is defined by the build.

#include <cstddef>

namespace fednest::kernels::detail {

void avx2_axpy(double a, const double* x, double* y, std::size_t n);
void avx2_step(const double* x, double a, const double* g, double* dst, std::size_t n);
void avx2_add(const double* a, const double* b, double* dst, std::size_t n);
void avx2_sub(const double* a, const double* b, double* dst, std::size_t n);
void avx2_scale(double* x, double a, std::size_t n);
double avx2_dot(const double* a, const double* b, std::size_t n);
double avx2_nrm2sq(const double* a, std::size_t n);

}  // namespace fednest::kernels::detail
