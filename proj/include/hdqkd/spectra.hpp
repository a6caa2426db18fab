#pragma once

#include "hdqkd/core.hpp"

#include <algorithm>
#include <random>
#include <vector>

namespace hdqkd {

struct SymmetricEigs {
    RealVector evals;  // ascending
    RealMatrix vecs;   // columns are eigenvectors, A = V diag(evals) V^T
};

// Cyclic Jacobi sweeps on a real symmetric matrix. Converges when the
// off-diagonal Frobenius mass drops below 1e-12 relative to ||A||_F.
inline SymmetricEigs jacobi_eigensystem(RealMatrix a) {
    const Eigen::Index n = a.rows();
    if (a.cols() != n) throw internal_error("jacobi: matrix not square");
    RealMatrix v = RealMatrix::Identity(n, n);
    const double fro = a.norm();
    // tight threshold: rotation roundoff keeps the off-diagonal mass near
    // n*eps*||A||, so aim just above that floor
    const double thresh = std::max(1e-15, double(n) * 3e-16) * (fro > 0 ? fro : 1.0);

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) off += 2.0 * sqr(a(p, q));
        if (std::sqrt(off) <= thresh) break;
        if (sweep == 99) throw internal_error("jacobi: no convergence in 100 sweeps");

        for (Eigen::Index p = 0; p < n - 1; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= thresh / (double(n) * double(n))) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                double t = 1.0 / (std::abs(theta) + std::sqrt(sqr(theta) + 1.0));
                if (theta < 0) t = -t;
                const double c = 1.0 / std::sqrt(sqr(t) + 1.0);
                const double s = t * c;
                const double tau = s / (1.0 + c);
                const double h = t * apq;
                a(p, p) -= h;
                a(q, q) += h;
                a(p, q) = a(q, p) = 0.0;
                for (Eigen::Index k = 0; k < n; ++k) {
                    if (k != p && k != q) {
                        const double akp = a(k, p), akq = a(k, q);
                        a(k, p) = a(p, k) = akp - s * (akq + tau * akp);
                        a(k, q) = a(q, k) = akq + s * (akp - tau * akq);
                    }
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = vkp - s * (vkq + tau * vkp);
                    v(k, q) = vkq + s * (vkp - tau * vkq);
                }
            }
        }
    }

    SymmetricEigs out;
    out.evals = a.diagonal();
    out.vecs = std::move(v);
    std::vector<Eigen::Index> order(static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[size_t(i)] = i;
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index i, Eigen::Index j) { return out.evals[i] < out.evals[j]; });
    RealVector ev(n);
    RealMatrix vv(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        ev[i] = out.evals[order[size_t(i)]];
        vv.col(i) = out.vecs.col(order[size_t(i)]);
    }
    out.evals = std::move(ev);
    out.vecs = std::move(vv);
    return out;
}

// Hermitian n x n -> symmetric 2n x 2n with the same spectrum (doubled).
inline RealMatrix real_embedding(const Matrix& m) {
    const Eigen::Index n = m.rows();
    RealMatrix e(2 * n, 2 * n);
    e.topLeftCorner(n, n) = m.real();
    e.bottomRightCorner(n, n) = m.real();
    e.topRightCorner(n, n) = -m.imag();
    e.bottomLeftCorner(n, n) = m.imag();
    return e;
}

struct SpectralResult {
    double lambda = 0.0;
    Vector vector;    // unit norm
    double residual = 0.0;
};

namespace detail {

inline void check_hermitian(const Matrix& m, double tol = 1e-10) {
    const double dev = (m - m.adjoint()).cwiseAbs().maxCoeff();
    if (dev > tol) throw internal_error("matrix not Hermitian (deviation " + std::to_string(dev) + ")");
}

inline void rayleigh_certify(const Matrix& m, double lambda, int trials = 50) {
    std::mt19937_64 rng(0x5eedbeefULL ^ (uint64_t)m.rows());
    std::normal_distribution<double> g(0.0, 1.0);
    const Eigen::Index n = m.rows();
    Vector u(n);
    for (int t = 0; t < trials; ++t) {
        for (Eigen::Index i = 0; i < n; ++i) u[i] = Complex(g(rng), g(rng));
        u /= u.norm();
        const double r = std::real(Complex(u.adjoint() * (m * u)));
        if (r > lambda + 1e-10)
            throw internal_error("Rayleigh certificate failed: quotient exceeds computed lambda_max");
    }
}

} // namespace detail

// Largest eigenvalue of a dense Hermitian matrix. Real inputs go through a
// plain symmetric Jacobi solve, complex ones through the real embedding.
inline SpectralResult lambda_max_dense(const Matrix& m) {
    detail::check_hermitian(m);
    const Eigen::Index n = m.rows();
    SpectralResult res;
    if (m.imag().cwiseAbs().maxCoeff() == 0.0) {
        SymmetricEigs eig = jacobi_eigensystem(m.real());
        res.lambda = eig.evals[n - 1];
        res.vector = eig.vecs.col(n - 1).cast<Complex>();
    } else {
        SymmetricEigs eig = jacobi_eigensystem(real_embedding(m));
        res.lambda = eig.evals[2 * n - 1];
        RealVector top = eig.vecs.col(2 * n - 1);
        Vector v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = Complex(top[i], top[n + i]);
        v /= v.norm();
        res.vector = std::move(v);
    }
    res.residual = (m * res.vector - res.lambda * res.vector).norm();
    const double fro = m.norm();
    if (res.residual > 1e-10 * (fro > 0 ? fro : 1.0))
        throw internal_error("eigen residual above certificate threshold");
    detail::rayleigh_certify(m, res.lambda);
    return res;
}

// Shifted power iteration; fallback for sizes where Jacobi is too slow.
inline SpectralResult lambda_max_power(const Matrix& m, int max_iters = 20000, double tol = 1e-11) {
    detail::check_hermitian(m);
    const Eigen::Index n = m.rows();
    const double shift = m.cwiseAbs().rowwise().sum().maxCoeff(); // >= spectral radius
    std::mt19937_64 rng(0x9e3779b9ULL);
    std::normal_distribution<double> g(0.0, 1.0);
    Vector x(n);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = Complex(g(rng), g(rng));
    x /= x.norm();
    const double fro = m.norm();
    SpectralResult res;
    for (int it = 0; it < max_iters; ++it) {
        Vector y = m * x + shift * x;
        const double ny = y.norm();
        if (ny == 0.0) break; // m = -shift*I exactly
        x = y / ny;
        res.lambda = std::real(Complex(x.adjoint() * (m * x)));
        res.residual = (m * x - res.lambda * x).norm();
        if (res.residual <= tol * (fro > 0 ? fro : 1.0)) break;
    }
    res.vector = x;
    return res;
}

namespace detail {

// Top root of a/mu + sum_k w_k/(mu + g_k) = 1 with g_k > 0, a > 0, on
// mu in (0, a + sum w]. Rational one-point model: the residual pole group is
// replaced by B/(mu+G) matched to value and slope, which lands in a few
// iterations where plain Newton crawls.
inline double secular_top_root(double a, const double* w, const double* g, size_t m, double mass,
                               double tol, double mu0 = -1.0) {
    // four independent accumulators let the divisions pipeline; the summation
    // order is fixed, so results stay deterministic
    auto eval = [&](double mu, double& s, double& sp) {
        double s0 = 0, s1 = 0, s2 = 0, s3 = 0, p0 = 0, p1 = 0, p2 = 0, p3 = 0;
        size_t k = 0;
        for (; k + 4 <= m; k += 4) {
            const double d0 = mu + g[k], d1 = mu + g[k + 1], d2 = mu + g[k + 2], d3 = mu + g[k + 3];
            const double t0 = w[k] / d0, t1 = w[k + 1] / d1, t2 = w[k + 2] / d2, t3 = w[k + 3] / d3;
            s0 += t0;
            s1 += t1;
            s2 += t2;
            s3 += t3;
            p0 += t0 / d0;
            p1 += t1 / d1;
            p2 += t2 / d2;
            p3 += t3 / d3;
        }
        double st = (s0 + s1) + (s2 + s3);
        double pt = (p0 + p1) + (p2 + p3);
        for (; k < m; ++k) {
            const double den = mu + g[k];
            const double t = w[k] / den;
            st += t;
            pt += t / den;
        }
        s = a / mu + st;
        sp = -a / sqr(mu) - pt;
    };
    double lo = 0.0, hi = mass;
    {
        double s, sp;
        eval(hi, s, sp);
        while (s > 1.0) {
            hi *= 2.0;
            eval(hi, s, sp);
        }
    }
    // warm start (e.g. the neighbouring row's root) saves most of the bracket work
    double mu = (mu0 > lo && mu0 < hi) ? mu0 : std::min(a * 1.5, 0.5 * hi);
    if (!(mu > lo && mu < hi)) mu = 0.5 * hi;
    for (int it = 0; it < 100; ++it) {
        double s, sp;
        eval(mu, s, sp);
        if (s > 1.0) lo = mu; else hi = mu;
        if (hi - lo <= tol) return 0.5 * (lo + hi);
        if (std::abs(s - 1.0) <= 0.5 * tol * std::abs(sp)) return mu; // |f/f'| below tol
        const double rest = s - a / mu;
        double next;
        if (rest <= 0.0) {
            next = a / 1.0; // pure top pole: exact
        } else {
            const double rest_p = sp + a / sqr(mu);
            const double shift = -rest / rest_p; // = mu + G of the fitted pole
            const double bg = sqr(rest) / (-rest_p);
            const double gg = shift - mu;
            const double c = gg - a - bg;
            next = 0.5 * (-c + std::sqrt(sqr(c) + 4.0 * a * gg));
        }
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == mu) return mu;
        mu = next;
    }
    return mu;
}

} // namespace detail

// Largest eigenvalue of diag(d) + u u^T via the rank-one secular equation.
// Accepts any vector expression for u (rows of a cached eigenbasis included).
template <typename Derived>
inline double secular_rank1_max(const RealVector& d, const Eigen::MatrixBase<Derived>& u) {
    const Eigen::Index n = d.size();
    const double dmax_all = d.maxCoeff();
    constexpr double deflate = 1e-30;
    double dmax_active = -std::numeric_limits<double>::infinity();
    double unorm2 = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        if (sqr(u[k]) > deflate) {
            dmax_active = std::max(dmax_active, d[k]);
            unorm2 += sqr(u[k]);
        }
    }
    if (unorm2 == 0.0) return dmax_all;

    // split the top pole group from the rest; compact buffers keep the inner
    // loops branch-free
    const double pole_tol = 1e-14 * (std::abs(dmax_active) + 1.0);
    double a = 0.0;
    thread_local std::vector<double> w, g;
    w.clear();
    g.clear();
    w.reserve(size_t(n));
    g.reserve(size_t(n));
    for (Eigen::Index k = 0; k < n; ++k) {
        const double wk = sqr(u[k]);
        if (wk <= deflate) continue;
        const double gk = dmax_active - d[k];
        if (gk <= pole_tol) a += wk;
        else {
            w.push_back(wk);
            g.push_back(gk);
        }
    }
    const double mu_tol = 2e-15 * (std::abs(dmax_active) + unorm2 + 1.0);
    const double mu = detail::secular_top_root(a, w.data(), g.data(), w.size(), unorm2, mu_tol);
    return std::max(mu + dmax_active, dmax_all);
}

// lambda_max(A + e_ell e_ell^T) given A's eigensystem.
inline double lambda_max_unit_update(const SymmetricEigs& eig, Eigen::Index ell) {
    return secular_rank1_max(eig.evals, eig.vecs.row(ell).transpose());
}

// Symmetric band (Toeplitz) matrix Q_ij = q_|i-j| on the diagonal-pair sector.
inline RealMatrix band_toeplitz(const RealVector& q) {
    const Eigen::Index d = q.size();
    RealMatrix m(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) m(i, j) = q[std::abs(i - j)];
    return m;
}

// Largest eigenvalue of M_ell for the two-witness structure, evaluated on the
// orthogonal sectors: a d x d block on span{|i,i>} plus two scalar branches
// from the off-diagonal-pair sector (with and without i = ell).
inline double lambda_max_blocked(Eigen::Index ell, const RealVector& q, double p,
                                 double y1, double tau) {
    const Eigen::Index d = q.size();
    if (ell < 0 || ell >= d) throw internal_error("lambda_max_blocked: ell out of range");
    RealMatrix b = -y1 * band_toeplitz(q);
    b(ell, ell) += 1.0;
    SymmetricEigs eig = jacobi_eigensystem(b);
    const double block = eig.evals[d - 1];
    return std::max({block, 1.0 - tau * p, -tau * p});
}

// Hot-path evaluator: one eigendecomposition of the sector matrix G, then a
// rank-one secular solve per ell for lambda_max(-G + e_ell e_ell^T).
class SectorEvaluator {
public:
    explicit SectorEvaluator(const RealMatrix& minus_g)
        : eig_(jacobi_eigensystem(minus_g)) {}

    double lambda_max(Eigen::Index ell) const { return lambda_max_unit_update(eig_, ell); }

    double max_over_ell(bool persymmetric) const {
        const Eigen::Index d = eig_.evals.size();
        const Eigen::Index last = persymmetric ? (d - 1) / 2 : d - 1;
        double m = -std::numeric_limits<double>::infinity();
        for (Eigen::Index ell = 0; ell <= last; ++ell) m = std::max(m, lambda_max(ell));
        return m;
    }

private:
    SymmetricEigs eig_;
};

// Pair-constraint specialization: Q's eigenvectors do not depend on the
// multiplier, so the per-evaluation decomposition is free.
class PairSectorEvaluator {
public:
    explicit PairSectorEvaluator(const RealVector& q)
        : d_(q.size()), eig_(jacobi_eigensystem(band_toeplitz(q))), rows_(eig_.vecs.transpose()) {}

    double lambda_max(Eigen::Index ell, double y1) const {
        return secular_rank1_max(-y1 * eig_.evals, rows_.col(ell));
    }

    // max_ell lambda_max(Delta_ell - y1 Q); the persymmetry of Q halves the
    // row set. All rows share the pole diagonal, so the gaps, the top-pole
    // index set, and the compaction order are hoisted out of the row loop.
    double max_over_ell(double y1) const {
        if (y1 == 0.0) return 1.0; // bare projector
        const RealVector diag = -y1 * eig_.evals;
        const double dmax = diag.maxCoeff();
        const double pole_tol = 1e-14 * (std::abs(dmax) + 1.0);
        thread_local std::vector<double> gbuf, wbuf;
        thread_local std::vector<Eigen::Index> rest, top;
        gbuf.clear();
        rest.clear();
        top.clear();
        for (Eigen::Index k = 0; k < d_; ++k) {
            const double gk = dmax - diag[k];
            if (gk <= pole_tol) top.push_back(k);
            else {
                gbuf.push_back(gk);
                rest.push_back(k);
            }
        }
        wbuf.resize(rest.size());
        const double mu_tol = 2e-15 * (std::abs(dmax) + 2.0);
        double best = -std::numeric_limits<double>::infinity();
        double prev_mu = -1.0;
        for (Eigen::Index ell = 0; ell <= (d_ - 1) / 2; ++ell) {
            const double* row = rows_.col(ell).data();
            double a = 0.0;
            for (Eigen::Index k : top) a += sqr(row[k]);
            for (size_t k = 0; k < rest.size(); ++k) wbuf[k] = sqr(row[rest[k]]);
            double mu;
            if (a <= 1e-30) {
                // top poles deflated for this row: fall back to the generic path
                mu = secular_rank1_max(diag, rows_.col(ell)) - dmax;
            } else {
                mu = detail::secular_top_root(a, wbuf.data(), gbuf.data(), wbuf.size(), 1.0, mu_tol,
                                              prev_mu);
                prev_mu = mu;
            }
            best = std::max(best, dmax + mu);
        }
        return best;
    }

    Eigen::Index dim() const { return d_; }

private:
    Eigen::Index d_;
    SymmetricEigs eig_;
    RealMatrix rows_; // V^T: row ell of the eigenbasis sits in a contiguous column
};

// PSD square root. Eigenvalues are clamped at zero before the root.
inline Matrix psd_sqrt(const Matrix& m) {
    detail::check_hermitian(m);
    const Eigen::Index n = m.rows();
    if (m.imag().cwiseAbs().maxCoeff() == 0.0) {
        SymmetricEigs eig = jacobi_eigensystem(m.real());
        RealVector roots = eig.evals.cwiseMax(0.0).cwiseSqrt();
        RealMatrix s = eig.vecs * roots.asDiagonal() * eig.vecs.transpose();
        return s.cast<Complex>();
    }
    // sqrt commutes with the complex structure of the embedding
    SymmetricEigs eig = jacobi_eigensystem(real_embedding(m));
    RealVector roots = eig.evals.cwiseMax(0.0).cwiseSqrt();
    RealMatrix s = eig.vecs * roots.asDiagonal() * eig.vecs.transpose();
    Matrix out(n, n);
    out.real() = s.topLeftCorner(n, n);
    out.imag() = s.bottomLeftCorner(n, n);
    return out;
}

} // namespace hdqkd
