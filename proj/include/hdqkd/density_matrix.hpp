#pragma once

#include "hdqkd/core.hpp"
#include "hdqkd/spectra.hpp"

#include <vector>

namespace hdqkd {

// Bipartite state on the d x d temporal space, indexed by basis pairs |i,j>
// with flat index i*d + j. Hermitian by construction.
class DensityMatrix {
public:
    DensityMatrix(Eigen::Index dim, Matrix entries) : dim_(dim), m_(std::move(entries)) {
        if (dim_ < 2) throw config_error("local dimension must be at least 2");
        if (m_.rows() != dim_ * dim_ || m_.cols() != dim_ * dim_)
            throw config_error("density matrix must be d^2 x d^2");
        m_ = 0.5 * (m_ + m_.adjoint().eval()); // enforce Hermiticity exactly
        real_ = m_.imag().cwiseAbs().maxCoeff() == 0.0;
    }

    // Construction paths that fill entries symmetrically can skip the
    // enforcement pass; the caller vouches for exact Hermiticity.
    static DensityMatrix from_hermitian(Eigen::Index dim, Matrix entries, bool is_real) {
        if (dim < 2) throw config_error("local dimension must be at least 2");
        if (entries.rows() != dim * dim || entries.cols() != dim * dim)
            throw config_error("density matrix must be d^2 x d^2");
        DensityMatrix rho;
        rho.dim_ = dim;
        rho.m_ = std::move(entries);
        rho.real_ = is_real;
        return rho;
    }

    Eigen::Index dim() const { return dim_; }
    const Matrix& entries() const { return m_; }
    bool is_real() const { return real_; }

    Complex entry(Eigen::Index bra_i, Eigen::Index bra_j, Eigen::Index ket_i, Eigen::Index ket_j) const {
        return m_(bra_i * dim_ + bra_j, ket_i * dim_ + ket_j);
    }

    double trace() const { return m_.trace().real(); }
    double purity() const { return (m_ * m_).trace().real(); }

private:
    DensityMatrix() = default;

    Eigen::Index dim_ = 0;
    Matrix m_;
    bool real_ = true;
};

struct NoiseModelSpec {
    double visibility = 1.0;
    Eigen::Index dim = 2;

    NoiseModelSpec(Eigen::Index d, double v) : visibility(v), dim(d) {
        if (d < 2) throw config_error("noise model: dimension must be >= 2");
        if (!(v >= 0.0 && v <= 1.0)) throw config_error("noise model: visibility must be in [0,1]");
    }
};

// (1/sqrt(d)) sum_k |kk>  as a density matrix.
inline DensityMatrix max_entangled(Eigen::Index d) {
    if (d < 2) throw config_error("max_entangled: dimension must be >= 2");
    Matrix m = Matrix::Zero(d * d, d * d);
    const double c = 1.0 / double(d);
    for (Eigen::Index k = 0; k < d; ++k)
        for (Eigen::Index l = 0; l < d; ++l) m(k * d + k, l * d + l) = c;
    return DensityMatrix::from_hermitian(d, std::move(m), true);
}

// v |Psi><Psi| + (1-v)/d^2 * Id on the temporal space.
inline DensityMatrix isotropic(Eigen::Index d, double v) {
    NoiseModelSpec spec(d, v); // validates
    Matrix m = Matrix::Zero(d * d, d * d);
    const double coh = v / double(d);
    for (Eigen::Index k = 0; k < d; ++k)
        for (Eigen::Index l = 0; l < d; ++l) m(k * d + k, l * d + l) = coh;
    const double mix = (1.0 - v) / double(d * d);
    m.diagonal().array() += mix;
    return DensityMatrix::from_hermitian(d, std::move(m), true);
}

struct SubspacePartition {
    Eigen::Index dim = 0;
    Eigen::Index block_size = 0;
    std::vector<std::vector<Eigen::Index>> blocks;

    // Contiguous blocks of equal size.
    static SubspacePartition contiguous(Eigen::Index d, Eigen::Index block_size) {
        if (block_size < 2 || d % block_size != 0)
            throw config_error("partition: d must be an exact multiple of the block size (>= 2)");
        SubspacePartition p;
        p.dim = d;
        p.block_size = block_size;
        for (Eigen::Index start = 0; start < d; start += block_size) {
            std::vector<Eigen::Index> b;
            for (Eigen::Index i = 0; i < block_size; ++i) b.push_back(start + i);
            p.blocks.push_back(std::move(b));
        }
        return p;
    }

    static SubspacePartition explicit_blocks(Eigen::Index d, std::vector<std::vector<Eigen::Index>> blocks) {
        SubspacePartition p;
        p.dim = d;
        p.blocks = std::move(blocks);
        if (p.blocks.empty()) throw config_error("partition: no blocks");
        p.block_size = Eigen::Index(p.blocks.front().size());
        std::vector<bool> seen(size_t(d), false);
        for (const auto& b : p.blocks) {
            if (Eigen::Index(b.size()) != p.block_size)
                throw config_error("partition: blocks must have equal size");
            for (Eigen::Index i : b) {
                if (i < 0 || i >= d || seen[size_t(i)])
                    throw config_error("partition: blocks must partition 0..d-1");
                seen[size_t(i)] = true;
            }
        }
        if (Eigen::Index(p.blocks.size()) * p.block_size != d)
            throw config_error("partition: blocks must cover all indices");
        return p;
    }
};

struct SubspaceProjection {
    double weight = 0.0;         // Tr[(Pi x Pi) rho (Pi x Pi)]
    DensityMatrix conditional;   // renormalized, re-indexed to the block dimension
};

// Project both parties onto span{|i> : i in block} and renormalize.
inline SubspaceProjection project_subspace(const DensityMatrix& rho,
                                           const std::vector<Eigen::Index>& block) {
    const Eigen::Index d = rho.dim();
    const Eigen::Index ds = Eigen::Index(block.size());
    if (ds < 2) throw config_error("project_subspace: block must have at least 2 indices");
    for (Eigen::Index i : block)
        if (i < 0 || i >= d) throw config_error("project_subspace: index outside 0..d-1");

    Matrix sub(ds * ds, ds * ds);
    for (Eigen::Index a = 0; a < ds; ++a)
        for (Eigen::Index b = 0; b < ds; ++b)
            for (Eigen::Index c = 0; c < ds; ++c)
                for (Eigen::Index e = 0; e < ds; ++e)
                    sub(a * ds + b, c * ds + e) =
                        rho.entry(block[size_t(a)], block[size_t(b)],
                                  block[size_t(c)], block[size_t(e)]);
    const double weight = sub.trace().real();
    if (weight < 1e-14) throw data_error("project_subspace: block carries no probability mass");
    sub /= weight;
    // a principal slice of a Hermitian matrix stays exactly Hermitian
    return SubspaceProjection{weight, DensityMatrix::from_hermitian(ds, std::move(sub), rho.is_real())};
}

struct StateDiagnostics {
    double hermiticity_defect = 0.0;
    double trace_defect = 0.0;
    double min_eigenvalue = 0.0;
    bool hermitian_ok = false;
    bool trace_ok = false;
    bool psd_ok = false;
    bool pass = false;
};

// Diagnostic check of the density-matrix invariants. The eigenvalue scan is a
// full Jacobi solve; intended for the small dimensions used in tests.
inline StateDiagnostics validate(const DensityMatrix& rho) {
    StateDiagnostics diag;
    const Matrix& m = rho.entries();
    diag.hermiticity_defect = (m - m.adjoint()).cwiseAbs().maxCoeff();
    diag.trace_defect = std::abs(rho.trace() - 1.0);
    if (rho.is_real()) {
        SymmetricEigs eig = jacobi_eigensystem(m.real());
        diag.min_eigenvalue = eig.evals[0];
    } else {
        SymmetricEigs eig = jacobi_eigensystem(real_embedding(m));
        diag.min_eigenvalue = eig.evals[0];
    }
    diag.hermitian_ok = diag.hermiticity_defect <= 1e-12;
    diag.trace_ok = diag.trace_defect <= kTraceTol;
    diag.psd_ok = diag.min_eigenvalue >= -kPsdTol;
    diag.pass = diag.hermitian_ok && diag.trace_ok && diag.psd_ok;
    return diag;
}

} // namespace hdqkd
