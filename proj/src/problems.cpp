#include "fednest/problems.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "fednest/errors.hpp"
#include "fednest/kernels.hpp"

namespace fednest {

std::string to_string(ProblemKind k) {
    switch (k) {
        case ProblemKind::bilevel: return "bilevel";
        case ProblemKind::minimax: return "minimax";
        case ProblemKind::compositional: return "compositional";
        case ProblemKind::single_level: return "single_level";
    }
    return "unknown";
}

namespace {

using kernels::axpy;
using kernels::scale;
using kernels::sub;
using linalg::matvec;
using linalg::matvec_t;

std::vector<double> gauss_vec(RngStream rng, std::size_t n, double s) {
    std::vector<double> v = rng.gaussian_vec(n);
    scale(v, s);
    return v;
}

void add_noise(std::vector<double>& v, double sigma, RngStream& rng) {
    if (sigma == 0.0) return;
    for (double& e : v) e += sigma * rng.gaussian();
}

// out += sigma * W v with W = (G + G^T)/2, G an iid standard-normal square
// matrix realised row-major from the stream. W is symmetric and mean zero, so
// the perturbed Hessian draw stays symmetric and unbiased; realising G before
// touching v keeps the draw linear in v.
void add_sym_matrix_noise(std::vector<double>& out, const std::vector<double>& v,
                          double sigma, RngStream& rng) {
    if (sigma == 0.0) return;
    const std::size_t n = v.size();
    std::vector<double> g(n * n);
    rng.gaussian_fill(g.data(), g.size());
    std::vector<double> gv(n), gtv(n);
    kernels::matvec(g.data(), n, n, v.data(), gv.data());
    kernels::matvec_t(g.data(), n, n, v.data(), gtv.data());
    for (std::size_t i = 0; i < n; ++i) out[i] += sigma * 0.5 * (gv[i] + gtv[i]);
}

// out += sigma * G v with G iid standard normal, rows = out dim, cols = v dim.
void add_rect_matrix_noise(std::vector<double>& out, const std::vector<double>& v,
                           double sigma, RngStream& rng) {
    if (sigma == 0.0) return;
    const std::size_t rows = out.size(), cols = v.size();
    std::vector<double> g(rows * cols);
    rng.gaussian_fill(g.data(), g.size());
    std::vector<double> gv(rows);
    kernels::matvec(g.data(), rows, cols, v.data(), gv.data());
    axpy(sigma, gv.data(), out.data(), rows);
}

std::vector<double> vec_mean(const std::vector<std::vector<double>>& vs) {
    return kernels::pairwise_mean(vs);
}

ParamPair draw_initial(std::uint64_t seed, std::size_t d1, std::size_t d2, double s) {
    RngStream rng = RngStream(seed).fork(tag::purpose, purpose::init);
    ParamPair z;
    z.x = gauss_vec(rng.fork('x'), d1, s);
    z.y = gauss_vec(rng.fork('y'), d2, s);
    return z;
}

// ---------------------------------------------------------------------------
// Minimax quadratic
// ---------------------------------------------------------------------------

class MinimaxQuadratic final : public Problem {
public:
    explicit MinimaxQuadratic(const MinimaxQuadraticSpec& spec) : spec_(spec) {
        if (spec.m < 1 || spec.d < 1)
            throw ValidationError("minimax-quadratic: need m >= 1 and d >= 1");
        if (spec.lambda <= 0.0)
            throw ValidationError("minimax-quadratic: lambda must be positive");
        if (spec.t_max <= 0.0)
            throw ValidationError("minimax-quadratic: t_max must be positive");

        const RngStream data = RngStream(spec.seed).fork(0xDA7A);
        t_.resize(spec.m);
        b_.resize(spec.m);
        for (std::size_t i = 0; i < spec.m; ++i) {
            RngStream ci = data.fork(tag::client, i);
            // 1 - U[0,1) lands in (0,1]: the coupling never vanishes.
            t_[i] = spec.t_max * (1.0 - ci.fork(1).uniform());
            b_[i] = gauss_vec(ci.fork(2), spec.d, spec.s);
        }
        // Recentre the offsets so they sum to (numerically) zero.
        std::vector<double> shift = vec_mean(b_);
        for (auto& bi : b_) sub(bi, shift, bi);
        bbar_ = vec_mean(b_);

        tbar_ = 0.0;
        for (double t : t_) tbar_ += t;
        tbar_ /= static_cast<double>(spec.m);

        // x* solves (tbar^2 + lambda) x = tbar * bbar.
        xstar_ = bbar_;
        scale(xstar_, tbar_ / (tbar_ * tbar_ + spec.lambda));
        ystar_ = solve_inner(xstar_);

        consts_.mu_g = 1.0;   // inner Hessian (of g = -f) is the identity
        consts_.l_g1 = 1.0;
        consts_.l_g2 = 0.0;
        double lf1 = 0.0, gnorm = 0.0;
        for (std::size_t i = 0; i < spec.m; ++i) {
            // Largest |eigenvalue| of the f_i Hessian [[lambda, -t],[-t, -1]].
            const double l = spec.lambda, t = t_[i];
            lf1 = std::max(lf1,
                           (std::abs(l - 1.0) + std::sqrt((l + 1.0) * (l + 1.0) + 4 * t * t)) / 2.0);
            // ||grad f_i|| at the optimum.
            std::vector<double> gx = xstar_;
            scale(gx, l);
            axpy(-t, ystar_, gx);
            std::vector<double> gy = b_[i];
            axpy(-1.0, ystar_, gy);
            axpy(-t, xstar_, gy);
            gnorm = std::max(gnorm, std::sqrt(kernels::nrm2sq(gx) + kernels::nrm2sq(gy)));
        }
        consts_.l_f1 = lf1;
        consts_.l_f0 = gnorm + lf1 * spec.r_op;

        init_ = draw_initial(spec.seed, spec.d, spec.d, spec.init_scale);
    }

    ProblemKind kind() const override {
        return spec_.as_bilevel ? ProblemKind::bilevel : ProblemKind::minimax;
    }
    std::size_t num_clients() const override { return spec_.m; }
    std::size_t dim_x() const override { return spec_.d; }
    std::size_t dim_y() const override { return spec_.d; }
    const ProblemConstants& constants() const override { return consts_; }
    const NoiseLevels& noise() const override { return spec_.noise; }

    // grad_y g_i = y - b_i + t_i x   (g = -f)
    std::vector<double> sample_inner_grad(std::size_t i, const ParamPair& z,
                                          RngStream rng) const override {
        std::vector<double> out = z.y;
        axpy(t_[i], z.x.data(), out.data(), out.size());
        sub(out, b_[i], out);
        add_noise(out, spec_.noise.sigma_g1, rng);
        return out;
    }

    OuterGrads sample_outer_grads(std::size_t i, const ParamPair& z,
                                  RngStream rng) const override {
        OuterGrads g;
        g.gx = z.x;                       // lambda x - t_i y
        scale(g.gx, spec_.lambda);
        axpy(-t_[i], z.y.data(), g.gx.data(), g.gx.size());
        g.gy = b_[i];                     // b_i - y - t_i x
        axpy(-1.0, z.y.data(), g.gy.data(), g.gy.size());
        axpy(-t_[i], z.x.data(), g.gy.data(), g.gy.size());
        add_noise(g.gx, spec_.noise.sigma_f, rng);
        add_noise(g.gy, spec_.noise.sigma_f, rng);
        return g;
    }

    std::vector<double> sample_hessvec(std::size_t, const ParamPair&,
                                       const std::vector<double>& v,
                                       RngStream rng) const override {
        std::vector<double> out = v;  // hess_yy g_i = I
        add_sym_matrix_noise(out, v, spec_.noise.sigma_g2, rng);
        return out;
    }

    std::vector<double> sample_jacvec(std::size_t i, const ParamPair&,
                                      const std::vector<double>& v,
                                      RngStream rng) const override {
        std::vector<double> out = v;  // hess_xy g_i = t_i I
        scale(out, t_[i]);
        add_rect_matrix_noise(out, v, spec_.noise.sigma_g2, rng);
        return out;
    }

    std::vector<double> solve_inner(const std::vector<double>& x) const override {
        std::vector<double> y = bbar_;  // y*(x) = bbar - tbar x
        axpy(-tbar_, x.data(), y.data(), y.size());
        return y;
    }

    std::vector<double> analytic_hypergradient(const std::vector<double>& x) const override {
        std::vector<double> g = x;  // tbar (tbar x - bbar) + lambda x
        scale(g, tbar_);
        sub(g, bbar_, g);
        scale(g, tbar_);
        axpy(spec_.lambda, x.data(), g.data(), g.size());
        return g;
    }

    double outer_value(const std::vector<double>& x) const override {
        std::vector<double> r = x;
        scale(r, tbar_);
        sub(r, bbar_, r);
        return 0.5 * kernels::nrm2sq(r) + 0.5 * spec_.lambda * kernels::nrm2sq(x);
    }

    std::vector<double> optimum_x() const override { return xstar_; }
    std::vector<double> optimum_y() const override { return ystar_; }
    ParamPair initial_point() const override { return init_; }

private:
    MinimaxQuadraticSpec spec_;
    std::vector<double> t_;
    std::vector<std::vector<double>> b_;
    double tbar_ = 0.0;
    std::vector<double> bbar_;
    std::vector<double> xstar_, ystar_;
    ProblemConstants consts_;
    ParamPair init_;
};

// ---------------------------------------------------------------------------
// Bilevel quadratic
// ---------------------------------------------------------------------------

class BilevelQuadratic final : public Problem {
public:
    BilevelQuadratic(BilevelQuadraticData data) : d_(std::move(data)) {
        const std::size_t m = d_.Q.size();
        if (m == 0 || d_.P.size() != m || d_.c.size() != m || d_.a.size() != m ||
            d_.u.size() != m)
            throw ValidationError("bilevel-quadratic: inconsistent per-client data");
        d2_ = d_.Q[0].rows;
        d1_ = d_.P[0].cols;
        if (d_.rho <= 0.0) throw ValidationError("bilevel-quadratic: rho must be positive");
        for (std::size_t i = 0; i < m; ++i) {
            if (d_.Q[i].rows != d2_ || d_.Q[i].cols != d2_ || d_.P[i].rows != d2_ ||
                d_.P[i].cols != d1_ || d_.c[i].size() != d2_ || d_.a[i].size() != d2_ ||
                d_.u[i].size() != d1_)
                throw ValidationError("bilevel-quadratic: client " + std::to_string(i) +
                                      " has mismatched shapes");
        }

        qbar_ = linalg::mean(d_.Q);
        pbar_ = linalg::mean(d_.P);
        cbar_ = vec_mean(d_.c);
        abar_ = vec_mean(d_.a);
        ubar_ = vec_mean(d_.u);
        qbar_inv_ = linalg::inverse_spd(qbar_);

        // Exact constants. Declared bracket wins when provided (construction
        // guarantees the spectra respect it); otherwise derive from the
        // eigenvalues themselves.
        double lam_min = linalg::sym_eig_range(qbar_).first;
        double lam_max = 0.0;
        for (const Mat& q : d_.Q) {
            const auto [lo, hi] = linalg::sym_eig_range(q);
            lam_min = std::min(lam_min, lo);
            lam_max = std::max(lam_max, hi);
        }
        if (lam_min <= 0.0)
            throw ValidationError("bilevel-quadratic: inner Hessians must be positive definite");
        consts_.mu_g = d_.mu_g > 0.0 ? d_.mu_g : lam_min;
        consts_.l_g1 = d_.l_g1 > 0.0 ? d_.l_g1 : lam_max;
        if (lam_min < consts_.mu_g || lam_max > consts_.l_g1)
            throw ValidationError("bilevel-quadratic: spectra violate the declared bracket");
        consts_.l_g2 = 0.0;
        consts_.l_f1 = std::max(d_.rho, 1.0);

        // x* from rho(x - ubar) + Pbar^T Qbar^{-2} Pbar x + Pbar^T Qbar^{-2} cbar
        //            + Pbar^T Qbar^{-1} abar = 0.
        const Mat qinv2 = linalg::matmul(qbar_inv_, qbar_inv_);
        Mat sys = linalg::matmul(linalg::transpose(pbar_), linalg::matmul(qinv2, pbar_));
        for (std::size_t j = 0; j < d1_; ++j) sys.at(j, j) += d_.rho;
        std::vector<double> t1 = matvec(qinv2, cbar_);
        const std::vector<double> t2 = matvec(qbar_inv_, abar_);
        kernels::add(t1, t2, t1);
        std::vector<double> rhs = matvec_t(pbar_, t1);
        scale(rhs, -1.0);
        axpy(d_.rho, ubar_.data(), rhs.data(), rhs.size());
        xstar_ = linalg::solve_spd(sys, rhs);
        ystar_ = solve_inner(xstar_);

        double gnorm = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            std::vector<double> dx = xstar_;
            sub(dx, d_.u[i], dx);
            std::vector<double> dy = ystar_;
            sub(dy, d_.a[i], dy);
            gnorm = std::max(gnorm, std::sqrt(d_.rho * d_.rho * kernels::nrm2sq(dx) +
                                              kernels::nrm2sq(dy)));
        }
        consts_.l_f0 = gnorm + consts_.l_f1 * d_.r_op;

        init_ = draw_initial(d_.seed, d1_, d2_, d_.init_scale);
    }

    ProblemKind kind() const override { return ProblemKind::bilevel; }
    std::size_t num_clients() const override { return d_.Q.size(); }
    std::size_t dim_x() const override { return d1_; }
    std::size_t dim_y() const override { return d2_; }
    const ProblemConstants& constants() const override { return consts_; }
    const NoiseLevels& noise() const override { return d_.noise; }

    // grad_y g_i = Q_i y + P_i x + c_i
    std::vector<double> sample_inner_grad(std::size_t i, const ParamPair& z,
                                          RngStream rng) const override {
        std::vector<double> out = matvec(d_.Q[i], z.y);
        const std::vector<double> px = matvec(d_.P[i], z.x);
        kernels::add(out, px, out);
        kernels::add(out, d_.c[i], out);
        add_noise(out, d_.noise.sigma_g1, rng);
        return out;
    }

    OuterGrads sample_outer_grads(std::size_t i, const ParamPair& z,
                                  RngStream rng) const override {
        OuterGrads g;
        g.gx = z.x;  // rho (x - u_i)
        sub(g.gx, d_.u[i], g.gx);
        scale(g.gx, d_.rho);
        g.gy = z.y;  // y - a_i
        sub(g.gy, d_.a[i], g.gy);
        add_noise(g.gx, d_.noise.sigma_f, rng);
        add_noise(g.gy, d_.noise.sigma_f, rng);
        return g;
    }

    std::vector<double> sample_hessvec(std::size_t i, const ParamPair&,
                                       const std::vector<double>& v,
                                       RngStream rng) const override {
        std::vector<double> out = matvec(d_.Q[i], v);
        add_sym_matrix_noise(out, v, d_.noise.sigma_g2, rng);
        return out;
    }

    std::vector<double> sample_jacvec(std::size_t i, const ParamPair&,
                                      const std::vector<double>& v,
                                      RngStream rng) const override {
        std::vector<double> out = matvec_t(d_.P[i], v);  // hess_xy g_i = P_i^T
        add_rect_matrix_noise(out, v, d_.noise.sigma_g2, rng);
        return out;
    }

    std::vector<double> solve_inner(const std::vector<double>& x) const override {
        std::vector<double> t = matvec(pbar_, x);
        kernels::add(t, cbar_, t);
        std::vector<double> y = matvec(qbar_inv_, t);
        scale(y, -1.0);
        return y;
    }

    std::vector<double> analytic_hypergradient(const std::vector<double>& x) const override {
        std::vector<double> dy = solve_inner(x);
        sub(dy, abar_, dy);
        const std::vector<double> w = matvec(qbar_inv_, dy);
        const std::vector<double> pw = matvec_t(pbar_, w);
        std::vector<double> g = x;  // rho (x - ubar) - Pbar^T Qbar^{-1} (y*(x) - abar)
        sub(g, ubar_, g);
        scale(g, d_.rho);
        axpy(-1.0, pw.data(), g.data(), g.size());
        return g;
    }

    double outer_value(const std::vector<double>& x) const override {
        const std::vector<double> ys = solve_inner(x);
        double acc = 0.0;
        for (std::size_t i = 0; i < d_.Q.size(); ++i) {
            std::vector<double> dx = x;
            sub(dx, d_.u[i], dx);
            std::vector<double> dy = ys;
            sub(dy, d_.a[i], dy);
            acc += 0.5 * kernels::nrm2sq(dy) + 0.5 * d_.rho * kernels::nrm2sq(dx);
        }
        return acc / static_cast<double>(d_.Q.size());
    }

    std::vector<double> optimum_x() const override { return xstar_; }
    std::vector<double> optimum_y() const override { return ystar_; }
    ParamPair initial_point() const override { return init_; }

private:
    BilevelQuadraticData d_;
    std::size_t d1_ = 0, d2_ = 0;
    Mat qbar_, pbar_, qbar_inv_;
    std::vector<double> cbar_, abar_, ubar_;
    std::vector<double> xstar_, ystar_;
    ProblemConstants consts_;
    ParamPair init_;
};

// ---------------------------------------------------------------------------
// Compositional
// ---------------------------------------------------------------------------

class Compositional final : public Problem {
public:
    explicit Compositional(const CompositionalSpec& spec) : spec_(spec) {
        if (spec.m < 1 || spec.d1 < 1 || spec.d2 < spec.d1)
            throw ValidationError("compositional: need m >= 1 and d2 >= d1 >= 1");
        if (spec.map_scale < 0.0 || spec.map_scale >= 1.0)
            throw ValidationError("compositional: map_scale must lie in [0, 1)");

        const RngStream data = RngStream(spec.seed).fork(0xDA7A);
        M_.reserve(spec.m);
        for (std::size_t i = 0; i < spec.m; ++i) {
            RngStream ci = data.fork(tag::client, i);
            Mat g(spec.d2, spec.d1);
            ci.fork(1).gaussian_fill(g.a.data(), g.a.size());
            const double nrm = linalg::spectral_norm(g);
            Mat mi(spec.d2, spec.d1);
            for (std::size_t j = 0; j < std::min(spec.d1, spec.d2); ++j) mi.at(j, j) = 1.0;
            if (nrm > 0.0)
                for (std::size_t k = 0; k < mi.a.size(); ++k)
                    mi.a[k] += spec.map_scale * g.a[k] / nrm;
            M_.push_back(std::move(mi));
            v_.push_back(gauss_vec(ci.fork(2), spec.d2, spec.v_spread));
            w_.push_back(gauss_vec(ci.fork(3), spec.d2, spec.w_spread));
        }
        mbar_ = linalg::mean(M_);
        vbar_ = vec_mean(v_);
        wbar_ = vec_mean(w_);

        // x* from Mbar^T (Mbar x + vbar - wbar) = 0.
        const Mat mtm = linalg::matmul(linalg::transpose(mbar_), mbar_);
        std::vector<double> rhs = wbar_;
        sub(rhs, vbar_, rhs);
        xstar_ = linalg::solve_spd(mtm, matvec_t(mbar_, rhs));
        ystar_ = solve_inner(xstar_);

        consts_.mu_g = 1.0;  // inner Hessian is exactly the identity
        consts_.l_g1 = 1.0;
        consts_.l_g2 = 0.0;
        consts_.l_f1 = 1.0;
        double gnorm = 0.0;
        for (std::size_t i = 0; i < spec.m; ++i) {
            std::vector<double> dy = ystar_;
            sub(dy, w_[i], dy);
            gnorm = std::max(gnorm, std::sqrt(kernels::nrm2sq(dy)));
        }
        consts_.l_f0 = gnorm + consts_.l_f1 * spec.r_op;

        init_ = draw_initial(spec.seed, spec.d1, spec.d2, spec.init_scale);
    }

    ProblemKind kind() const override { return ProblemKind::compositional; }
    std::size_t num_clients() const override { return spec_.m; }
    std::size_t dim_x() const override { return spec_.d1; }
    std::size_t dim_y() const override { return spec_.d2; }
    const ProblemConstants& constants() const override { return consts_; }
    const NoiseLevels& noise() const override { return spec_.noise; }

    // grad_y g_i = y - r_i(x; draw),  r_i(x) = M_i x + v_i
    std::vector<double> sample_inner_grad(std::size_t i, const ParamPair& z,
                                          RngStream rng) const override {
        std::vector<double> out = z.y;
        const std::vector<double> mx = matvec(M_[i], z.x);
        sub(out, mx, out);
        sub(out, v_[i], out);
        add_noise(out, spec_.noise.sigma_g1, rng);
        return out;
    }

    OuterGrads sample_outer_grads(std::size_t i, const ParamPair& z,
                                  RngStream rng) const override {
        OuterGrads g;
        g.gx.assign(spec_.d1, 0.0);  // f_i does not depend on x
        g.gy = z.y;                  // y - w_i
        sub(g.gy, w_[i], g.gy);
        add_noise(g.gx, spec_.noise.sigma_f, rng);
        add_noise(g.gy, spec_.noise.sigma_f, rng);
        return g;
    }

    // hess_yy g_i is the identity for every draw — exact by structure.
    std::vector<double> sample_hessvec(std::size_t, const ParamPair&,
                                       const std::vector<double>& v,
                                       RngStream) const override {
        return v;
    }

    // hess_xy g_i = -Jac r_i^T; the draw jitters the Jacobian.
    std::vector<double> sample_jacvec(std::size_t i, const ParamPair&,
                                      const std::vector<double>& v,
                                      RngStream rng) const override {
        std::vector<double> out = matvec_t(M_[i], v);
        scale(out, -1.0);
        add_rect_matrix_noise(out, v, spec_.noise.sigma_g2, rng);
        return out;
    }

    std::vector<double> solve_inner(const std::vector<double>& x) const override {
        std::vector<double> y = matvec(mbar_, x);
        kernels::add(y, vbar_, y);
        return y;
    }

    std::vector<double> analytic_hypergradient(const std::vector<double>& x) const override {
        std::vector<double> r = solve_inner(x);
        sub(r, wbar_, r);
        return matvec_t(mbar_, r);
    }

    double outer_value(const std::vector<double>& x) const override {
        const std::vector<double> ys = solve_inner(x);
        double acc = 0.0;
        for (std::size_t i = 0; i < spec_.m; ++i) {
            std::vector<double> dy = ys;
            sub(dy, w_[i], dy);
            acc += 0.5 * kernels::nrm2sq(dy);
        }
        return acc / static_cast<double>(spec_.m);
    }

    std::vector<double> optimum_x() const override { return xstar_; }
    std::vector<double> optimum_y() const override { return ystar_; }
    ParamPair initial_point() const override { return init_; }

private:
    CompositionalSpec spec_;
    std::vector<Mat> M_;
    std::vector<std::vector<double>> v_, w_;
    Mat mbar_;
    std::vector<double> vbar_, wbar_;
    std::vector<double> xstar_, ystar_;
    ProblemConstants consts_;
    ParamPair init_;
};

// ---------------------------------------------------------------------------
// Single level
// ---------------------------------------------------------------------------

class SingleLevel final : public Problem {
public:
    explicit SingleLevel(const SingleLevelSpec& spec) : spec_(spec) {
        if (spec.m < 1 || spec.d < 1)
            throw ValidationError("single-level: need m >= 1 and d >= 1");
        const RngStream data = RngStream(spec.seed).fork(0xDA7A);
        u_.resize(spec.m);
        for (std::size_t i = 0; i < spec.m; ++i)
            u_[i] = gauss_vec(data.fork(tag::client, i), spec.d, spec.u_spread);
        ubar_ = vec_mean(u_);

        consts_.mu_g = 1.0;
        consts_.l_g1 = 1.0;
        consts_.l_g2 = 0.0;
        consts_.l_f1 = 1.0;
        double gnorm = 0.0;
        for (const auto& ui : u_) {
            std::vector<double> dx = ubar_;
            sub(dx, ui, dx);
            gnorm = std::max(gnorm, std::sqrt(kernels::nrm2sq(dx)));
        }
        consts_.l_f0 = gnorm + consts_.l_f1 * spec.r_op;

        init_ = draw_initial(spec.seed, spec.d, 0, spec.init_scale);
    }

    ProblemKind kind() const override { return ProblemKind::single_level; }
    std::size_t num_clients() const override { return spec_.m; }
    std::size_t dim_x() const override { return spec_.d; }
    std::size_t dim_y() const override { return 0; }
    const ProblemConstants& constants() const override { return consts_; }
    const NoiseLevels& noise() const override { return spec_.noise; }

    std::vector<double> sample_inner_grad(std::size_t, const ParamPair&,
                                          RngStream) const override {
        throw UnsupportedConfigError("single-level instance has no inner problem");
    }

    OuterGrads sample_outer_grads(std::size_t i, const ParamPair& z,
                                  RngStream rng) const override {
        OuterGrads g;
        g.gx = z.x;
        sub(g.gx, u_[i], g.gx);
        add_noise(g.gx, spec_.noise.sigma_f, rng);
        return g;
    }

    std::vector<double> sample_hessvec(std::size_t, const ParamPair&,
                                       const std::vector<double>&,
                                       RngStream) const override {
        throw UnsupportedConfigError("single-level instance has no inner problem");
    }

    std::vector<double> sample_jacvec(std::size_t, const ParamPair&,
                                      const std::vector<double>&,
                                      RngStream) const override {
        throw UnsupportedConfigError("single-level instance has no inner problem");
    }

    std::vector<double> solve_inner(const std::vector<double>&) const override { return {}; }

    std::vector<double> analytic_hypergradient(const std::vector<double>& x) const override {
        std::vector<double> g = x;
        sub(g, ubar_, g);
        return g;
    }

    double outer_value(const std::vector<double>& x) const override {
        double acc = 0.0;
        for (const auto& ui : u_) {
            std::vector<double> dx = x;
            sub(dx, ui, dx);
            acc += 0.5 * kernels::nrm2sq(dx);
        }
        return acc / static_cast<double>(u_.size());
    }

    std::vector<double> optimum_x() const override { return ubar_; }
    std::vector<double> optimum_y() const override { return {}; }
    ParamPair initial_point() const override { return init_; }

private:
    SingleLevelSpec spec_;
    std::vector<std::vector<double>> u_;
    std::vector<double> ubar_;
    ProblemConstants consts_;
    ParamPair init_;
};

}  // namespace

ProblemPtr make_minimax_quadratic(const MinimaxQuadraticSpec& spec) {
    return std::make_shared<MinimaxQuadratic>(spec);
}

ProblemPtr make_bilevel_quadratic(const BilevelQuadraticData& data) {
    return std::make_shared<BilevelQuadratic>(data);
}

ProblemPtr make_bilevel_quadratic(const BilevelQuadraticSpec& spec) {
    if (spec.m < 1 || spec.d1 < 1 || spec.d2 < 1)
        throw ValidationError("bilevel-quadratic: need m, d1, d2 >= 1");
    if (spec.eig_min <= 0.0 || spec.eig_max < spec.eig_min)
        throw ValidationError("bilevel-quadratic: need 0 < eig_min <= eig_max");
    if (spec.cross_scale < 0.0 || spec.cross_scale > spec.eig_min)
        throw ValidationError(
            "bilevel-quadratic: cross_scale must lie in [0, eig_min] so the cross "
            "blocks never dominate the inner curvature");
    if (spec.cross_hetero < 0.0 || spec.cross_hetero > 1.0)
        throw ValidationError("bilevel-quadratic: cross_hetero must lie in [0, 1]");

    const RngStream data = RngStream(spec.seed).fork(0xDA7A);

    // Shared unit-norm cross direction; per-client unit-norm jitter.
    Mat p0(spec.d2, spec.d1);
    {
        RngStream ps = data.fork(0x9);
        ps.gaussian_fill(p0.a.data(), p0.a.size());
        const double nrm = linalg::spectral_norm(p0);
        if (nrm > 0.0)
            for (double& e : p0.a) e /= nrm;
    }

    BilevelQuadraticData d;
    d.rho = spec.rho;
    d.mu_g = spec.eig_min;
    d.l_g1 = spec.eig_max;
    d.r_op = spec.r_op;
    d.init_scale = spec.init_scale;
    d.seed = spec.seed;
    d.noise = spec.noise;
    for (std::size_t i = 0; i < spec.m; ++i) {
        RngStream ci = data.fork(tag::client, i);
        d.Q.push_back(linalg::random_spd(spec.d2, spec.eig_min, spec.eig_max, ci.fork(1)));
        Mat pi(spec.d2, spec.d1);
        RngStream js = ci.fork(2);
        js.gaussian_fill(pi.a.data(), pi.a.size());
        const double nrm = linalg::spectral_norm(pi);
        for (std::size_t k = 0; k < pi.a.size(); ++k) {
            const double jitter = nrm > 0.0 ? pi.a[k] / nrm : 0.0;
            pi.a[k] = spec.cross_scale *
                      ((1.0 - spec.cross_hetero) * p0.a[k] + spec.cross_hetero * jitter);
        }
        d.P.push_back(std::move(pi));
        d.c.push_back(gauss_vec(ci.fork(3), spec.d2, spec.c_spread));
        d.a.push_back(gauss_vec(ci.fork(4), spec.d2, spec.a_spread));
        d.u.push_back(gauss_vec(ci.fork(5), spec.d1, spec.u_spread));
    }
    return std::make_shared<BilevelQuadratic>(std::move(d));
}

ProblemPtr make_compositional(const CompositionalSpec& spec) {
    return std::make_shared<Compositional>(spec);
}

ProblemPtr make_single_level(const SingleLevelSpec& spec) {
    return std::make_shared<SingleLevel>(spec);
}

BilevelQuadraticSpec heterogeneous_bilevel_preset() {
    BilevelQuadraticSpec s;
    s.m = 10;
    s.d1 = 5;
    s.d2 = 5;
    s.eig_min = 0.5;
    s.eig_max = 2.0;
    s.cross_scale = 0.4;
    s.cross_hetero = 1.0;
    s.c_spread = 3.0;
    s.a_spread = 2.0;
    s.u_spread = 2.0;
    s.rho = 1.0;
    s.seed = 7;
    return s;
}

}  // namespace fednest
