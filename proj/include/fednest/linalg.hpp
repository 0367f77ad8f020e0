#pragma once

// Small dense-matrix utilities for instance construction, closed forms and
// test oracles. Row-major storage; the heavy lifting (eigen-decompositions,
// SPD solves) is Eigen-backed inside the .cpp so headers stay light. Runtime
// simulation arithmetic does NOT go through here — it uses the kernels module.

#include <cstddef>
#include <utility>
#include <vector>

#include "fednest/rng.hpp"

namespace fednest {

struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a;  // row-major, rows*cols

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return a[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return a[r * cols + c]; }

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
        return m;
    }
};

namespace linalg {

// out = A v (uses the dispatched kernels, so backend choice applies here too).
std::vector<double> matvec(const Mat& A, const std::vector<double>& v);
// out = A^T v
std::vector<double> matvec_t(const Mat& A, const std::vector<double>& v);

Mat matmul(const Mat& A, const Mat& B);
Mat transpose(const Mat& A);
Mat mean(const std::vector<Mat>& ms);

// Haar-ish random orthogonal matrix (QR of a Gaussian draw, sign-fixed).
Mat random_orthogonal(std::size_t n, RngStream rng);

// Random symmetric positive definite matrix with spectrum inside
// [eig_min*(1+pad), eig_max*(1-pad)]: the largest eigenvalue is pinned at
// the padded top, the smallest at the padded bottom, the rest drawn
// uniformly in between. The two-sided pad keeps the declared bracket
// [eig_min, eig_max] strictly slack, so floating-point reconstruction and
// re-diagonalisation cannot push an eigenvalue outside it, and bounds stated
// against the declared bracket hold with real margin rather than equality.
// Throws std::invalid_argument when the bracket is too narrow for the pad.
Mat random_spd(std::size_t n, double eig_min, double eig_max, RngStream rng,
               double pad = 0.01);

// Min/max eigenvalue of a symmetric matrix.
std::pair<double, double> sym_eig_range(const Mat& A);

// Operator 2-norm. sym variant assumes symmetry (max |eigenvalue|).
double spectral_norm_sym(const Mat& A);
double spectral_norm(const Mat& A);

// SPD solve / inverse via Cholesky.
std::vector<double> solve_spd(const Mat& A, const std::vector<double>& b);
Mat inverse_spd(const Mat& A);

}  // namespace linalg
}  // namespace fednest
