#pragma once

#include "hdqkd/core.hpp"
#include "hdqkd/density_matrix.hpp"
#include "hdqkd/dual_solver.hpp"
#include "hdqkd/spectra.hpp"

#include <random>
#include <vector>

namespace hdqkd {

// Inverse PSD square root with eigenvalue clamping.
inline Matrix psd_inv_sqrt(const Matrix& m, double floor = 1e-13) {
    detail::check_hermitian(m);
    const Eigen::Index n = m.rows();
    auto build = [&](const SymmetricEigs& eig) {
        RealVector w(eig.evals.size());
        for (Eigen::Index i = 0; i < w.size(); ++i)
            w[i] = eig.evals[i] > floor ? 1.0 / std::sqrt(eig.evals[i]) : 0.0;
        return RealMatrix(eig.vecs * w.asDiagonal() * eig.vecs.transpose());
    };
    if (m.imag().cwiseAbs().maxCoeff() == 0.0) return build(jacobi_eigensystem(m.real())).cast<Complex>();
    RealMatrix s = build(jacobi_eigensystem(real_embedding(m)));
    Matrix out(n, n);
    out.real() = s.topLeftCorner(n, n);
    out.imag() = s.bottomLeftCorner(n, n);
    return out;
}

// Random POVM: PSD draws G_l = A_l A_l^dagger whitened by the inverse square
// root of their sum, so completeness holds by construction.
inline std::vector<Matrix> random_povm(Eigen::Index dim, int outcomes, uint64_t seed) {
    if (outcomes < 1) throw config_error("random_povm: at least one outcome");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<Matrix> gs;
    Matrix sum = Matrix::Zero(dim, dim);
    for (int l = 0; l < outcomes; ++l) {
        Matrix a(dim, dim);
        for (Eigen::Index i = 0; i < dim; ++i)
            for (Eigen::Index j = 0; j < dim; ++j) a(i, j) = Complex(g(rng), g(rng));
        Matrix gl = a * a.adjoint();
        sum += gl;
        gs.push_back(std::move(gl));
    }
    Matrix white = psd_inv_sqrt(sum);
    // one Newton-Schulz step pushes the whitening residual to machine epsilon
    for (int it = 0; it < 2; ++it) {
        white = 0.5 * white * (3.0 * Matrix::Identity(dim, dim) - sum * white * white);
        white = 0.5 * (white + white.adjoint().eval());
    }
    std::vector<Matrix> povm;
    for (auto& gl : gs) {
        Matrix k = white * gl * white;
        k = 0.5 * (k + k.adjoint().eval());
        povm.push_back(std::move(k));
    }
    return povm;
}

inline std::vector<Matrix> computational_basis_povm(Eigen::Index d) {
    std::vector<Matrix> povm;
    for (Eigen::Index l = 0; l < d; ++l) {
        Matrix k = Matrix::Zero(d * d, d * d);
        for (Eigen::Index j = 0; j < d; ++j) k(l * d + j, l * d + j) = 1.0;
        povm.push_back(std::move(k));
    }
    return povm;
}

inline std::vector<Matrix> uniform_povm(Eigen::Index d) {
    return std::vector<Matrix>(size_t(d), Matrix::Identity(d * d, d * d) / double(d));
}

struct PrimalSample {
    double value = 0.0;
    uint64_t seed = 0;
    int outcomes = 0;
};

// Feasible primal value: sigma_l = sqrt(rho) K_l sqrt(rho) sums to rho, so all
// witness constraints generated from rho hold and the value must stay below
// every certified dual bound.
inline double primal_sample_value(const Matrix& sqrt_rho, const std::vector<Matrix>& povm,
                                  Eigen::Index d) {
    if (Eigen::Index(povm.size()) != d)
        throw config_error("primal sample: the POVM must have d outcomes (one per guess)");
    double value = 0.0;
    for (Eigen::Index l = 0; l < d; ++l) {
        if (povm[size_t(l)].rows() != d * d) throw config_error("primal sample: POVM dimension mismatch");
        const Matrix t = sqrt_rho * povm[size_t(l)] * sqrt_rho;
        double acc = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) acc += std::real(t(l * d + j, l * d + j));
        value += acc;
    }
    return value;
}

inline PrimalSample primal_sample_value(const DensityMatrix& rho, const std::vector<Matrix>& povm) {
    PrimalSample s;
    s.outcomes = int(povm.size());
    s.value = primal_sample_value(psd_sqrt(rho.entries()), povm, rho.dim());
    return s;
}

struct SandwichReport {
    int samples = 0;
    int violations = 0;
    double max_sample = 0.0;
    double gap = 0.0; // bound - max_sample
    bool pass = false;
};

// Weak-duality soundness check: no explicitly constructed Eve strategy may
// beat a certified bound (tolerance 1e-7).
inline SandwichReport sandwich_check(const GuessBound& bound, const DensityMatrix& rho,
                                     int n_samples, uint64_t seed) {
    SandwichReport rep;
    rep.samples = n_samples;
    const Matrix root = psd_sqrt(rho.entries());
    const Eigen::Index d = rho.dim();
    for (int i = 0; i < n_samples; ++i) {
        const auto povm = random_povm(d * d, int(d), seed + uint64_t(i));
        const double value = primal_sample_value(root, povm, d);
        rep.max_sample = std::max(rep.max_sample, value);
        if (value > bound.p_guess_ub + kSandwichTol) ++rep.violations;
    }
    rep.gap = bound.p_guess_ub - rep.max_sample;
    rep.pass = rep.violations == 0;
    return rep;
}

} // namespace hdqkd
