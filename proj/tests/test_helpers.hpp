#pragma once

#include "hdqkd/core.hpp"
#include "hdqkd/density_matrix.hpp"

#include <random>

namespace hdqkd::testing {

inline RealMatrix random_symmetric(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    RealMatrix a(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) a(i, j) = g(rng);
    return 0.5 * (a + a.transpose().eval());
}

inline Matrix random_hermitian(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Matrix a(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) a(i, j) = Complex(g(rng), g(rng));
    return 0.5 * (a + a.adjoint().eval());
}

// Random density matrix (unit trace, PSD) on a d x d bipartite space.
inline DensityMatrix random_state(Eigen::Index d, std::mt19937_64& rng, bool complex_entries = true) {
    const Eigen::Index n = d * d;
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix a(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            a(i, j) = complex_entries ? Complex(g(rng), g(rng)) : Complex(g(rng), 0.0);
    Matrix rho = a * a.adjoint();
    rho /= rho.trace().real();
    return DensityMatrix(d, std::move(rho));
}

inline RealMatrix random_psd(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    RealMatrix a(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) a(i, j) = g(rng);
    RealMatrix m = a * a.transpose();
    return m / m.trace();
}

} // namespace hdqkd::testing
