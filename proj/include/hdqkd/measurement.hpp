#pragma once

#include "hdqkd/core.hpp"
#include "hdqkd/density_matrix.hpp"

#include <boost/container/flat_map.hpp>

#include <array>
#include <map>
#include <optional>
#include <tuple>
#include <vector>

namespace hdqkd {

constexpr double kPhaseX = 0.0;                  // generalized x setting
inline const double kPhaseY = std::acos(-1.0) / 2.0; // generalized y setting (pi/2)

// Time-of-Arrival joint probabilities: TT(i,j) = <i,j|rho|i,j>.
inline RealMatrix toa_table(const DensityMatrix& rho) {
    const Eigen::Index d = rho.dim();
    RealMatrix tt(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) tt(i, j) = std::real(rho.entry(i, j, i, j));
    return tt;
}

namespace detail {

// Interference amplitudes: bin i with weight 1, bin i-1 with weight
// (-1)^(x-1) e^{-i phi}. The four-bin product vector spans the 2x2 window.
struct TsupWindow {
    std::array<Eigen::Index, 4> idx; // flat indices of |i,j>,|i,j-1>,|i-1,j>,|i-1,j-1>
    std::array<Complex, 4> coeff;
};

inline TsupWindow tsup_window(Eigen::Index d, int a, int b, Eigen::Index i, Eigen::Index j,
                              double phi_a, double phi_b, bool transpose_convention) {
    if (a < 1 || a > 2 || b < 1 || b > 2) throw config_error("tsup: outcome labels must be 1 or 2");
    if (i < 1 || i >= d || j < 1 || j >= d)
        throw config_error("tsup: bins must satisfy 1 <= i,j <= d-1 (the window references i-1, j-1)");
    Complex alpha = double((a == 1) ? 1 : -1) * std::exp(Complex(0.0, -phi_a));
    Complex beta = double((b == 1) ? 1 : -1) * std::exp(Complex(0.0, -phi_b));
    if (!transpose_convention) {
        alpha = std::conj(alpha);
        beta = std::conj(beta);
    }
    TsupWindow w;
    w.idx = {i * d + j, i * d + (j - 1), (i - 1) * d + j, (i - 1) * d + (j - 1)};
    w.coeff = {Complex(1.0, 0.0), beta, alpha, alpha * beta};
    return w;
}

} // namespace detail

// Temporal-superposition click probability SS_{a,b}(i,j,phiA,phiB): the
// sixteen-term window expansion divided by four. With the default convention
// the expansion is read off rho^T, which matches the physical Born value of
// tsup_click_oracle exactly.
inline double tsup_click(const DensityMatrix& rho, int a, int b, Eigen::Index i, Eigen::Index j,
                         double phi_a, double phi_b, bool transpose_convention = true) {
    const auto w = detail::tsup_window(rho.dim(), a, b, i, j, phi_a, phi_b, transpose_convention);
    Complex acc(0.0, 0.0);
    for (int x = 0; x < 4; ++x)
        for (int y = 0; y < 4; ++y)
            acc += std::conj(w.coeff[size_t(x)]) * w.coeff[size_t(y)] *
                   rho.entries()(w.idx[size_t(x)], w.idx[size_t(y)]);
    const double val = acc.real() / 4.0;
    if (val < -1e-12) throw internal_error("tsup_click: negative probability from a valid state");
    return val;
}

// Independent check: materializes the interferometer states on the full
// polarization (x) time space, applies the Born rule against |DD><DD| (x) rho,
// and removes the fixed polarization-overlap factor (<D|H><D|V> per party).
inline double tsup_click_oracle(const DensityMatrix& rho, int a, int b, Eigen::Index i,
                                Eigen::Index j, double phi_a, double phi_b) {
    const Eigen::Index d = rho.dim();
    (void)detail::tsup_window(d, a, b, i, j, phi_a, phi_b, true); // argument validation
    const double r2 = 1.0 / std::sqrt(2.0);

    // single-party vectors on pol (x) time, pol index 0=H, 1=V
    auto party = [&](int x, Eigen::Index bin, double phi) {
        Vector v = Vector::Zero(2 * d);
        v[0 * d + bin] = r2;
        v[1 * d + (bin - 1)] = double((x == 1) ? 1 : -1) * std::exp(Complex(0.0, -phi)) * r2;
        return v;
    };
    const Vector pa = party(a, i, phi_a);
    const Vector pb = party(b, j, phi_b);

    // full vector ordered as (polA, polB) (x) (timeA, timeB)
    Vector psi = Vector::Zero(4 * d * d);
    for (Eigen::Index qa = 0; qa < 2; ++qa)
        for (Eigen::Index ta = 0; ta < d; ++ta)
            for (Eigen::Index qb = 0; qb < 2; ++qb)
                for (Eigen::Index tb = 0; tb < d; ++tb)
                    psi[(qa * 2 + qb) * d * d + ta * d + tb] = pa[qa * d + ta] * pb[qb * d + tb];

    Vector dd = Vector::Zero(4);
    dd << 0.5, 0.5, 0.5, 0.5; // |DD> in the (polA,polB) basis
    Matrix sigma(4 * d * d, 4 * d * d);
    for (Eigen::Index p = 0; p < 4; ++p)
        for (Eigen::Index q = 0; q < 4; ++q)
            sigma.block(p * d * d, q * d * d, d * d, d * d) =
                dd[p] * std::conj(dd[q]) * rho.entries();
    const double born = std::real(Complex(psi.adjoint() * (sigma * psi)));
    return 4.0 * born;
}

struct SSKey {
    int a = 1, b = 1;
    Eigen::Index i = 1, j = 1;
    double phi_a = 0.0, phi_b = 0.0;

    bool operator<(const SSKey& o) const {
        return std::tie(a, b, i, j, phi_a, phi_b) < std::tie(o.a, o.b, o.i, o.j, o.phi_a, o.phi_b);
    }
};

struct ClickTables {
    Eigen::Index dim = 0;
    RealMatrix tt;
    boost::container::flat_map<SSKey, double> ss;

    std::optional<double> find_ss(int a, int b, Eigen::Index i, Eigen::Index j, double phi_a,
                                  double phi_b, double phase_tol = 1e-9) const {
        SSKey from{a, b, i, j, -std::numeric_limits<double>::infinity(),
                   -std::numeric_limits<double>::infinity()};
        for (auto it = ss.lower_bound(from); it != ss.end(); ++it) {
            const SSKey& k = it->first;
            if (k.a != a || k.b != b || k.i != i || k.j != j) break;
            if (std::abs(k.phi_a - phi_a) <= phase_tol && std::abs(k.phi_b - phi_b) <= phase_tol)
                return it->second;
        }
        return std::nullopt;
    }

    bool has_setting(Eigen::Index i, Eigen::Index j, double phi_a, double phi_b) const {
        for (int a = 1; a <= 2; ++a)
            for (int b = 1; b <= 2; ++b)
                if (!find_ss(a, b, i, j, phi_a, phi_b)) return false;
        return true;
    }
};

// Signed four-outcome combination isolating the phase-dependent coherences.
inline double d_combination(double ss11, double ss12, double ss21, double ss22) {
    return ss11 - ss12 - ss21 + ss22;
}

inline double d_combination(const ClickTables& tables, Eigen::Index i, Eigen::Index j,
                            double phi_a, double phi_b) {
    std::array<double, 4> v{};
    int n = 0;
    for (int a = 1; a <= 2; ++a)
        for (int b = 1; b <= 2; ++b) {
            auto s = tables.find_ss(a, b, i, j, phi_a, phi_b);
            if (!s) throw data_error("d_combination: missing outcome (" + std::to_string(a) + "," +
                                     std::to_string(b) + ") for the requested setting");
            v[size_t(n++)] = *s;
        }
    return d_combination(v[0], v[1], v[2], v[3]);
}

// Inversion of the x/y settings: returns (Re<i,j|rho^T|i-1,j-1>, Re<i,j-1|rho^T|i-1,j>).
inline std::pair<double, double> extract_re_offdiag(double d00, double dpi2) {
    return {0.25 * (d00 - dpi2), 0.25 * (d00 + dpi2)};
}

// x-measurement-only lower bound on Re<i,j|rho^T|i-1,j-1>; the subtracted term
// is the Cauchy-Schwarz product bound on the unobserved anti-band element.
inline double xonly_lower_bound(double d00, const RealMatrix& tt, Eigen::Index i, Eigen::Index j) {
    if (i < 1 || j < 1 || i >= tt.rows() || j >= tt.cols())
        throw config_error("xonly_lower_bound: bins must satisfy 1 <= i,j <= d-1");
    const double rad = std::max(tt(i - 1, j) * tt(i, j - 1), 0.0);
    return d00 / 4.0 - std::sqrt(rad);
}

// Simulated click tables for the standard x/y settings on adjacent bins.
// xonly = true drops the y setting, exercising the bound-only path.
inline ClickTables simulate_click_tables(const DensityMatrix& rho, bool xonly = false) {
    ClickTables t;
    t.dim = rho.dim();
    t.tt = toa_table(rho);
    std::vector<std::pair<double, double>> phases{{kPhaseX, kPhaseX}};
    if (!xonly) phases.emplace_back(kPhaseY, kPhaseY);
    // key order matches the loop order, so every insert is a hinted append
    for (int a = 1; a <= 2; ++a)
        for (int b = 1; b <= 2; ++b)
            for (Eigen::Index i = 1; i < t.dim; ++i)
                for (Eigen::Index j = 1; j < t.dim; ++j)
                    for (auto [pa, pb] : phases)
                        t.ss.emplace_hint(t.ss.end(), SSKey{a, b, i, j, pa, pb},
                                          tsup_click(rho, a, b, i, j, pa, pb));
    return t;
}

// Closed-form click tables for the isotropic model. Equivalent to simulating
// the dense state (the window overlap with sum_k |kk> has at most two terms)
// but without materializing the d^2 x d^2 matrix; the sweep driver uses this,
// the dense route stays the reference in tests.
inline ClickTables simulate_click_tables(const NoiseModelSpec& spec, bool xonly = false) {
    const Eigen::Index d = spec.dim;
    const double v = spec.visibility;
    ClickTables t;
    t.dim = d;
    t.tt = RealMatrix::Constant(d, d, (1.0 - v) / double(d * d));
    t.tt.diagonal().array() += v / double(d);
    std::vector<std::pair<double, double>> phases{{kPhaseX, kPhaseX}};
    if (!xonly) phases.emplace_back(kPhaseY, kPhaseY);
    const double mixed = (1.0 - v) / double(d * d);
    for (int a = 1; a <= 2; ++a)
        for (int b = 1; b <= 2; ++b)
            for (Eigen::Index i = 1; i < d; ++i)
                for (Eigen::Index j = 1; j < d; ++j)
                    for (auto [pa, pb] : phases) {
                        double overlap2 = 0.0; // |<Psi|chi>|^2 * d
                        const double sg = double((a == 1) ? 1 : -1) * double((b == 1) ? 1 : -1);
                        if (i == j) overlap2 = 2.0 + 2.0 * sg * std::cos(pa + pb);
                        else if (j == i + 1 || i == j + 1) overlap2 = 1.0;
                        t.ss.emplace_hint(t.ss.end(), SSKey{a, b, i, j, pa, pb},
                                          0.25 * (v * overlap2 / double(d) + 4.0 * mixed));
                    }
    return t;
}

// Density-matrix elements recovered (or bounded) from the click tables.
struct ExtractedElements {
    Eigen::Index dim = 0;
    RealMatrix diag;                                          // = TT
    std::map<std::pair<Eigen::Index, Eigen::Index>, double> re_sum_band;  // Re<i,j|.|i-1,j-1>
    std::map<std::pair<Eigen::Index, Eigen::Index>, double> re_anti_band; // Re<i,j-1|.|i-1,j>
    std::map<std::pair<Eigen::Index, Eigen::Index>, double> lower_bounds; // x-only mode
    bool xonly_mode = false;

    // Max violation of |re| <= sqrt(TT * TT); zero for exact simulated data.
    double cauchy_schwarz_defect() const {
        double defect = 0.0;
        for (const auto& [ij, val] : re_sum_band) {
            const auto [i, j] = ij;
            const double cs = std::sqrt(std::max(diag(i, j) * diag(i - 1, j - 1), 0.0));
            defect = std::max(defect, std::abs(val) - cs);
        }
        for (const auto& [ij, val] : re_anti_band) {
            const auto [i, j] = ij;
            const double cs = std::sqrt(std::max(diag(i, j - 1) * diag(i - 1, j), 0.0));
            defect = std::max(defect, std::abs(val) - cs);
        }
        return defect;
    }
};

// Runs the D-combination inversion for every (i,j) window present in the
// tables. Windows missing the y setting fall back to the x-only lower bound.
inline ExtractedElements extract_elements(const ClickTables& tables) {
    ExtractedElements out;
    out.dim = tables.dim;
    out.diag = tables.tt;
    const Eigen::Index d = tables.dim;

    // one pass over the (sorted) table, accumulating the signed combination
    // and an outcome mask per window and canonical setting
    struct Acc {
        double dval[2] = {0.0, 0.0};
        int mask[2] = {0, 0};
    };
    std::vector<Acc> acc(size_t(d * d));
    auto setting_of = [](double pa, double pb) -> int {
        if (std::abs(pa - kPhaseX) <= 1e-9 && std::abs(pb - kPhaseX) <= 1e-9) return 0;
        if (std::abs(pa - kPhaseY) <= 1e-9 && std::abs(pb - kPhaseY) <= 1e-9) return 1;
        return -1;
    };
    for (const auto& [k, value] : tables.ss) {
        const int s = setting_of(k.phi_a, k.phi_b);
        if (s < 0 || k.i < 1 || k.i >= d || k.j < 1 || k.j >= d) continue;
        Acc& a = acc[size_t(k.i * d + k.j)];
        a.dval[s] += ((k.a == k.b) ? value : -value);
        a.mask[s] |= 1 << ((k.a - 1) * 2 + (k.b - 1));
    }

    for (Eigen::Index i = 1; i < d; ++i) {
        for (Eigen::Index j = 1; j < d; ++j) {
            const Acc& a = acc[size_t(i * d + j)];
            if (a.mask[0] != 0xF) continue;
            const double d00 = a.dval[0];
            if (a.mask[1] == 0xF) {
                auto [re_sum, re_anti] = extract_re_offdiag(d00, a.dval[1]);
                out.re_sum_band[{i, j}] = re_sum;
                out.re_anti_band[{i, j}] = re_anti;
            } else {
                out.lower_bounds[{i, j}] = xonly_lower_bound(d00, tables.tt, i, j);
                out.xonly_mode = true;
            }
        }
    }
    return out;
}

} // namespace hdqkd
