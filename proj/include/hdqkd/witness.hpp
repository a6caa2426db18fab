#pragma once

#include "hdqkd/core.hpp"
#include "hdqkd/completion.hpp"
#include "hdqkd/measurement.hpp"

#include <map>
#include <string>
#include <vector>

namespace hdqkd {

// Observables entering the guessing-probability program. The structured kinds
// act either on the diagonal-pair sector span{|i,i>} or as multiples of the
// identity on the off-diagonal-pair sector, which is what keeps the dual
// eigenproblem block-separable.
struct WitnessOperator {
    enum class Kind { BandToeplitz, PairProjector, SectorUnitDiag, SectorUnitBand, Generic };

    Kind kind = Kind::Generic;
    Eigen::Index dim = 0;
    RealVector q;          // BandToeplitz coefficients q_0..q_{d-1}
    double p = 0.0;        // PairProjector coefficient
    Eigen::Index k = 0;    // SectorUnit* position
    Matrix dense;          // Generic

    // W1-shaped: q0 sum |ii><ii| + sum_z q_z (|ii><i+z,i+z| + h.c.)
    static WitnessOperator band_diagonal_pair(Eigen::Index d, RealVector q) {
        if (q.size() != d) throw config_error("band witness needs d coefficients");
        WitnessOperator w;
        w.kind = Kind::BandToeplitz;
        w.dim = d;
        w.q = std::move(q);
        return w;
    }

    // W2-shaped: p sum_{i != j} |ij><ij|
    static WitnessOperator off_diagonal_projector(Eigen::Index d, double p) {
        WitnessOperator w;
        w.kind = Kind::PairProjector;
        w.dim = d;
        w.p = p;
        return w;
    }

    static WitnessOperator sector_unit_diag(Eigen::Index d, Eigen::Index k) {
        if (k < 0 || k >= d) throw config_error("sector diag witness: index out of range");
        WitnessOperator w;
        w.kind = Kind::SectorUnitDiag;
        w.dim = d;
        w.k = k;
        return w;
    }

    static WitnessOperator sector_unit_band(Eigen::Index d, Eigen::Index k) {
        if (k < 0 || k + 1 >= d) throw config_error("sector band witness: index out of range");
        WitnessOperator w;
        w.kind = Kind::SectorUnitBand;
        w.dim = d;
        w.k = k;
        return w;
    }

    static WitnessOperator generic(Eigen::Index d, Matrix m) {
        if (m.rows() != d * d || m.cols() != d * d)
            throw config_error("generic witness must be d^2 x d^2");
        if ((m - m.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
            throw data_error("generic witness must be Hermitian within 1e-12");
        WitnessOperator w;
        w.kind = Kind::Generic;
        w.dim = d;
        w.dense = std::move(m);
        return w;
    }

    bool sector_structured() const { return kind != Kind::Generic; }

    // Contribution to the d x d diagonal-pair sector block.
    void add_to_sector(RealMatrix& g, double coeff) const {
        switch (kind) {
            case Kind::BandToeplitz:
                for (Eigen::Index i = 0; i < dim; ++i)
                    for (Eigen::Index j = 0; j < dim; ++j) g(i, j) += coeff * q[std::abs(i - j)];
                break;
            case Kind::SectorUnitDiag: g(k, k) += coeff; break;
            case Kind::SectorUnitBand:
                g(k, k + 1) += coeff;
                g(k + 1, k) += coeff;
                break;
            case Kind::PairProjector: break; // acts only on the pair sector
            default: throw internal_error("generic witness has no sector form");
        }
    }

    // Multiple of the identity this witness contributes on the pair sector.
    double pair_coefficient() const { return kind == Kind::PairProjector ? p : 0.0; }

    Matrix materialize() const {
        const Eigen::Index d = dim, n = d * d;
        switch (kind) {
            case Kind::Generic: return dense;
            case Kind::PairProjector: {
                Matrix m = Matrix::Zero(n, n);
                for (Eigen::Index i = 0; i < d; ++i)
                    for (Eigen::Index j = 0; j < d; ++j)
                        if (i != j) m(i * d + j, i * d + j) = p;
                return m;
            }
            default: {
                RealMatrix g = RealMatrix::Zero(d, d);
                add_to_sector(g, 1.0);
                Matrix m = Matrix::Zero(n, n);
                for (Eigen::Index i = 0; i < d; ++i)
                    for (Eigen::Index j = 0; j < d; ++j)
                        m(i * d + i, j * d + j) = g(i, j);
                return m;
            }
        }
    }

    double expectation(const DensityMatrix& rho) const {
        return (materialize() * rho.entries()).trace().real();
    }

    // Gershgorin bound on the operator norm; cheap and always valid.
    double norm_bound() const {
        switch (kind) {
            case Kind::BandToeplitz: {
                double best = 0.0;
                for (Eigen::Index i = 0; i < dim; ++i) {
                    double row = 0.0;
                    for (Eigen::Index j = 0; j < dim; ++j) row += std::abs(q[std::abs(i - j)]);
                    best = std::max(best, row);
                }
                return best;
            }
            case Kind::PairProjector: return std::abs(p);
            case Kind::SectorUnitDiag: return 1.0;
            case Kind::SectorUnitBand: return 1.0;
            default: return dense.cwiseAbs().rowwise().sum().maxCoeff();
        }
    }

    double frobenius_norm() const {
        switch (kind) {
            case Kind::BandToeplitz: {
                double s = double(dim) * sqr(q[0]);
                for (Eigen::Index z = 1; z < dim; ++z) s += 2.0 * double(dim - z) * sqr(q[z]);
                return std::sqrt(s);
            }
            case Kind::PairProjector: return std::abs(p) * std::sqrt(double(dim * dim - dim));
            case Kind::SectorUnitDiag: return 1.0;
            case Kind::SectorUnitBand: return std::sqrt(2.0);
            default: return dense.norm();
        }
    }
};

// Observable paired with what measurements say about its expectation.
struct WitnessConstraint {
    WitnessOperator op;
    bool is_equality = true;
    double w = 0.0;      // equality value
    Interval bounds;     // interval form

    static WitnessConstraint equality(WitnessOperator o, double value) {
        const double nb = o.norm_bound();
        if (std::abs(value) > nb + 1e-8)
            throw data_error("witness expectation exceeds the operator-norm bound");
        WitnessConstraint c;
        c.op = std::move(o);
        c.is_equality = true;
        c.w = value;
        return c;
    }

    static WitnessConstraint interval(WitnessOperator o, double lo, double hi) {
        if (lo > hi) throw data_error("witness interval with lo > hi");
        const double nb = o.norm_bound();
        WitnessConstraint c;
        c.op = std::move(o);
        c.is_equality = false;
        c.bounds = Interval(lo, hi).intersect(Interval(-nb, nb)); // |Tr(rho W)| <= ||W||
        if (c.bounds.empty()) throw data_error("witness interval excludes every physical value");
        return c;
    }

    bool admits(double value, double tol = 1e-10) const {
        return is_equality ? std::abs(value - w) <= tol : bounds.contains(value, tol);
    }
};

// ---------------------------------------------------------------------------
// Presets

struct WitnessPreset {
    std::string name;
    Eigen::Index dim = 0;
    RealVector q;
    double p = 1.0;
    std::vector<std::string> warnings;

    WitnessOperator band_witness() const { return WitnessOperator::band_diagonal_pair(dim, q); }
    WitnessOperator pair_witness() const { return WitnessOperator::off_diagonal_projector(dim, p); }
};

using QOverrides = std::map<int, double>;

inline void apply_overrides(WitnessPreset& preset, const QOverrides& overrides) {
    for (const auto& [z, value] : overrides) {
        if (z < 0 || z >= preset.dim) throw config_error("q override index out of range");
        preset.q[z] = value;
    }
}

// Fixed d=16 coefficient set; q1 is not part of the preset definition and
// defaults to 0 with a warning (override to set it).
inline WitnessPreset kh1_preset(Eigen::Index d = 16, const QOverrides& overrides = {}) {
    if (d != 16) throw config_error("kh1 preset is defined for d = 16 only");
    WitnessPreset w;
    w.name = "kh1";
    w.dim = d;
    w.q = RealVector::Zero(d);
    w.q[0] = -1.0;
    w.q[2] = 1.0;
    w.q[3] = 2.7;
    w.q[4] = 0.47;
    w.p = 1.0;
    if (!overrides.count(1)) w.warnings.push_back("kh1: q1 unspecified by the preset; defaulted to 0");
    apply_overrides(w, overrides);
    return w;
}

inline WitnessPreset kh2_preset(Eigen::Index d = 16, const QOverrides& overrides = {}) {
    if (d != 16) throw config_error("kh2 preset is defined for d = 16 only");
    WitnessPreset w;
    w.name = "kh2";
    w.dim = d;
    w.q = RealVector::Zero(d);
    for (Eigen::Index z = 1; z <= 11; ++z) w.q[z] = 1.0;
    w.p = 1.0;
    apply_overrides(w, overrides);
    return w;
}

// Exponential band profile q_z = exp(-c (z - s)); q0 defaults to 0.
inline WitnessPreset khexp_preset(Eigen::Index d, double c = 0.75, double s = 4.0, double q0 = 0.0,
                                  const QOverrides& overrides = {}) {
    if (d < 2) throw config_error("khexp preset needs d >= 2");
    WitnessPreset w;
    w.name = "khexp";
    w.dim = d;
    w.q = RealVector::Zero(d);
    w.q[0] = q0;
    for (Eigen::Index z = 1; z < d; ++z) w.q[z] = std::exp(-c * (double(z) - s));
    w.p = 1.0;
    apply_overrides(w, overrides);
    return w;
}

inline WitnessPreset make_preset(const std::string& name, Eigen::Index d, double c = 0.75,
                                 double s = 4.0, double q0 = 0.0, const QOverrides& overrides = {}) {
    if (name == "kh1") return kh1_preset(d, overrides);
    if (name == "kh2") return kh2_preset(d, overrides);
    if (name == "khexp") return khexp_preset(d, c, s, q0, overrides);
    throw config_error("unknown witness preset: " + name);
}

// ---------------------------------------------------------------------------
// Expectations from click data

inline void require_normalized_tt(const RealMatrix& tt) {
    if (tt.minCoeff() < -1e-12) throw data_error("TT table has negative entries");
    if (std::abs(tt.sum() - 1.0) > 1e-6) throw data_error("TT table is not normalized");
}

// w2 = p * sum_{i != j} TT(i,j); exact from ToA statistics.
inline WitnessConstraint expectation_w2(const RealMatrix& tt, double p) {
    require_normalized_tt(tt);
    const double w2 = p * (tt.sum() - tt.diagonal().sum());
    return WitnessConstraint::equality(
        WitnessOperator::off_diagonal_projector(tt.rows(), p), w2);
}

// |kk>-sector instance for the completion: diagonal from ToA, first band from
// the superposition inversion (interval-valued in x-only mode).
inline PartialRealSymmetric sector_instance(const RealMatrix& tt, const ExtractedElements& ex) {
    const Eigen::Index d = tt.rows();
    PartialRealSymmetric r(d);
    for (Eigen::Index k = 0; k < d; ++k) r.set_known(k, k, tt(k, k));
    for (Eigen::Index k = 1; k < d; ++k) {
        auto it = ex.re_sum_band.find({k, k});
        if (it != ex.re_sum_band.end()) {
            r.set_known(k - 1, k, it->second);
            continue;
        }
        auto lb = ex.lower_bounds.find({k, k});
        if (lb != ex.lower_bounds.end()) {
            const double cs = std::sqrt(std::max(tt(k - 1, k - 1) * tt(k, k), 0.0));
            r.set_interval(k - 1, k, std::max(lb->second, -cs), cs);
        }
    }
    return r;
}

// w1 interval from the completed sector matrix; entries the completion never
// reached fall back to their 2x2 Cauchy-Schwarz range.
inline WitnessConstraint expectation_interval_w1(const WitnessPreset& preset, const RealMatrix& tt,
                                                 const PartialRealSymmetric& completed) {
    require_normalized_tt(tt);
    const Eigen::Index d = preset.dim;
    if (tt.rows() != d || completed.dim() != d)
        throw config_error("w1 interval: dimension mismatch");
    Interval acc = Interval::point(preset.q[0] * tt.diagonal().sum());
    for (Eigen::Index z = 1; z < d; ++z) {
        if (preset.q[z] == 0.0) continue;
        Interval band(0.0, 0.0);
        for (Eigen::Index i = 0; i + z < d; ++i) {
            Interval e = completed.interval(i, i + z);
            if (!e.bounded()) {
                const double cs = std::sqrt(std::max(tt(i, i) * tt(i + z, i + z), 0.0));
                e = e.intersect(Interval(-cs, cs));
            }
            band = band + e;
        }
        acc = acc + band.scaled(2.0 * preset.q[z]);
    }
    return WitnessConstraint::interval(preset.band_witness(), acc.lo, acc.hi);
}

// Equality constraints for everything measured element-by-element: the d ToA
// diagonal-sector entries and the d-1 first-band real parts. These are the
// same data the w1 aggregate is built from, exposed as individual observables;
// including them tightens the dual considerably near v = 1.
inline std::vector<WitnessConstraint> measured_element_constraints(const RealMatrix& tt,
                                                                   const ExtractedElements& ex) {
    require_normalized_tt(tt);
    const Eigen::Index d = tt.rows();
    std::vector<WitnessConstraint> out;
    for (Eigen::Index k = 0; k < d; ++k)
        out.push_back(WitnessConstraint::equality(WitnessOperator::sector_unit_diag(d, k), tt(k, k)));
    for (Eigen::Index k = 1; k < d; ++k) {
        auto it = ex.re_sum_band.find({k, k});
        if (it != ex.re_sum_band.end()) {
            out.push_back(WitnessConstraint::equality(WitnessOperator::sector_unit_band(d, k - 1),
                                                      2.0 * it->second));
        } else {
            auto lb = ex.lower_bounds.find({k, k});
            if (lb == ex.lower_bounds.end()) continue;
            const double cs = std::sqrt(std::max(tt(k - 1, k - 1) * tt(k, k), 0.0));
            out.push_back(WitnessConstraint::interval(WitnessOperator::sector_unit_band(d, k - 1),
                                                      2.0 * std::max(lb->second, -cs), 2.0 * cs));
        }
    }
    return out;
}

enum class ConstraintSet { Pair, Augmented };

inline ConstraintSet constraint_set_from_string(const std::string& s) {
    if (s == "pair") return ConstraintSet::Pair;
    if (s == "augmented") return ConstraintSet::Augmented;
    throw config_error("constraint set must be 'pair' or 'augmented'");
}

// Full constraint assembly for one protocol instance.
inline std::vector<WitnessConstraint> build_constraints(const WitnessPreset& preset,
                                                        const RealMatrix& tt,
                                                        const ExtractedElements& ex,
                                                        const PartialRealSymmetric& completed,
                                                        ConstraintSet set) {
    std::vector<WitnessConstraint> cs;
    cs.push_back(expectation_w2(tt, preset.p));
    cs.push_back(expectation_interval_w1(preset, tt, completed));
    if (set == ConstraintSet::Augmented) {
        auto measured = measured_element_constraints(tt, ex);
        cs.insert(cs.end(), measured.begin(), measured.end());
    }
    return cs;
}

} // namespace hdqkd
