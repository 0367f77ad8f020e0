#include "fednest/linalg.hpp"

#include <Eigen/Dense>

#include <stdexcept>

#include "fednest/kernels.hpp"

namespace fednest::linalg {
namespace {

Eigen::MatrixXd to_eigen(const Mat& m) {
    Eigen::MatrixXd e(static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols));
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c)
            e(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m.at(r, c);
    return e;
}

Mat mat_from_eigen(const Eigen::MatrixXd& e) {
    Mat m(static_cast<std::size_t>(e.rows()), static_cast<std::size_t>(e.cols()));
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c)
            m.at(r, c) = e(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    return m;
}

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> vec_from_eigen(const Eigen::VectorXd& v) {
    return {v.data(), v.data() + v.size()};
}

}  // namespace

std::vector<double> matvec(const Mat& A, const std::vector<double>& v) {
    if (v.size() != A.cols) throw std::invalid_argument("matvec: shape mismatch");
    std::vector<double> out(A.rows);
    kernels::matvec(A.a.data(), A.rows, A.cols, v.data(), out.data());
    return out;
}

std::vector<double> matvec_t(const Mat& A, const std::vector<double>& v) {
    if (v.size() != A.rows) throw std::invalid_argument("matvec_t: shape mismatch");
    std::vector<double> out(A.cols);
    kernels::matvec_t(A.a.data(), A.rows, A.cols, v.data(), out.data());
    return out;
}

Mat matmul(const Mat& A, const Mat& B) {
    if (A.cols != B.rows) throw std::invalid_argument("matmul: shape mismatch");
    return mat_from_eigen(to_eigen(A) * to_eigen(B));
}

Mat transpose(const Mat& A) { return mat_from_eigen(to_eigen(A).transpose()); }

Mat mean(const std::vector<Mat>& ms) {
    if (ms.empty()) throw std::invalid_argument("mean of zero matrices");
    Eigen::MatrixXd acc = to_eigen(ms[0]);
    for (std::size_t i = 1; i < ms.size(); ++i) acc += to_eigen(ms[i]);
    acc /= static_cast<double>(ms.size());
    return mat_from_eigen(acc);
}

Mat random_orthogonal(std::size_t n, RngStream rng) {
    Eigen::MatrixXd g(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c)
            g(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rng.gaussian();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    // Fix signs so the factorisation (and thus the output) is unique.
    for (Eigen::Index c = 0; c < q.cols(); ++c)
        if (r(c, c) < 0.0) q.col(c) *= -1.0;
    return mat_from_eigen(q);
}

Mat random_spd(std::size_t n, double eig_min, double eig_max, RngStream rng, double pad) {
    if (n == 0 || eig_min <= 0.0 || eig_max < eig_min)
        throw std::invalid_argument("random_spd: need n>=1 and 0 < eig_min <= eig_max");
    const double lo = eig_min * (1.0 + pad);
    const double hi = eig_max * (1.0 - pad);
    if (hi < lo)
        throw std::invalid_argument("random_spd: bracket too narrow for the requested pad");
    std::vector<double> eigs(n);
    eigs[0] = n == 1 ? hi : lo;
    if (n >= 2) eigs[n - 1] = hi;
    for (std::size_t i = 1; i + 1 < n; ++i) eigs[i] = lo + (hi - lo) * rng.uniform();
    const Mat u = random_orthogonal(n, rng.fork(0x0e1));
    Eigen::MatrixXd ue = to_eigen(u);
    Eigen::VectorXd d(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) d(static_cast<Eigen::Index>(i)) = eigs[i];
    Eigen::MatrixXd a = ue * d.asDiagonal() * ue.transpose();
    a = 0.5 * (a + a.transpose());  // kill rounding asymmetry
    return mat_from_eigen(a);
}

std::pair<double, double> sym_eig_range(const Mat& A) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(A),
                                                      Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    return {ev.minCoeff(), ev.maxCoeff()};
}

double spectral_norm_sym(const Mat& A) {
    const auto [lo, hi] = sym_eig_range(A);
    return std::max(std::abs(lo), std::abs(hi));
}

double spectral_norm(const Mat& A) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(A));
    return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

std::vector<double> solve_spd(const Mat& A, const std::vector<double>& b) {
    Eigen::LLT<Eigen::MatrixXd> llt(to_eigen(A));
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("solve_spd: matrix is not positive definite");
    return vec_from_eigen(llt.solve(to_eigen(b)).eval());
}

Mat inverse_spd(const Mat& A) {
    Eigen::LLT<Eigen::MatrixXd> llt(to_eigen(A));
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("inverse_spd: matrix is not positive definite");
    const Eigen::MatrixXd inv =
        llt.solve(Eigen::MatrixXd::Identity(to_eigen(A).rows(), to_eigen(A).cols()));
    return mat_from_eigen(inv);
}

}  // namespace fednest::linalg
