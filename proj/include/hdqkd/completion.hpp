#pragma once

#include "hdqkd/core.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hdqkd {

enum class EntryStatus { Known, Bounded, Unknown };

inline std::string to_string(EntryStatus s) {
    switch (s) {
        case EntryStatus::Known: return "known";
        case EntryStatus::Bounded: return "interval";
        default: return "unknown";
    }
}

// Partially known real part of a density matrix: every entry is a known value,
// a closed interval, or unknown. Symmetric by construction.
class PartialRealSymmetric {
public:
    explicit PartialRealSymmetric(Eigen::Index n)
        : n_(n), status_(size_t(n * n), EntryStatus::Unknown), iv_(size_t(n * n)) {
        if (n < 1) throw config_error("partial matrix: dimension must be positive");
    }

    Eigen::Index dim() const { return n_; }

    void set_known(Eigen::Index j, Eigen::Index l, double v) {
        at(j, l) = at(l, j) = Interval::point(v);
        st(j, l) = st(l, j) = EntryStatus::Known;
    }

    void set_interval(Eigen::Index j, Eigen::Index l, double lo, double hi) {
        if (lo > hi) throw data_error("partial matrix: interval with lo > hi");
        at(j, l) = at(l, j) = Interval(lo, hi);
        st(j, l) = st(l, j) = EntryStatus::Bounded;
    }

    EntryStatus status(Eigen::Index j, Eigen::Index l) const { return st(j, l); }
    bool available(Eigen::Index j, Eigen::Index l) const { return st(j, l) != EntryStatus::Unknown; }

    // For Unknown entries this is the unbounded interval.
    Interval interval(Eigen::Index j, Eigen::Index l) const {
        return available(j, l) ? at(j, l) : Interval();
    }

    double known_value(Eigen::Index j, Eigen::Index l) const {
        if (st(j, l) != EntryStatus::Known) throw data_error("partial matrix: entry is not known");
        return at(j, l).lo;
    }

    void validate() const {
        for (Eigen::Index k = 0; k < n_; ++k) {
            if (st(k, k) != EntryStatus::Known)
                throw data_error("partial matrix: diagonal entries must be known");
            if (at(k, k).lo < 0) throw data_error("partial matrix: negative diagonal entry");
        }
        for (Eigen::Index j = 0; j < n_; ++j)
            for (Eigen::Index l = j + 1; l < n_; ++l) {
                if (st(j, l) == EntryStatus::Known) {
                    const double cs = std::sqrt(at(j, j).lo * at(l, l).lo);
                    if (std::abs(at(j, l).lo) > cs + 1e-10)
                        throw data_error("partial matrix: known entry violates the 2x2 minor bound");
                }
            }
    }

private:
    Interval& at(Eigen::Index j, Eigen::Index l) { return iv_[size_t(j * n_ + l)]; }
    const Interval& at(Eigen::Index j, Eigen::Index l) const { return iv_[size_t(j * n_ + l)]; }
    EntryStatus& st(Eigen::Index j, Eigen::Index l) { return status_[size_t(j * n_ + l)]; }
    const EntryStatus& st(Eigen::Index j, Eigen::Index l) const { return status_[size_t(j * n_ + l)]; }

    Eigen::Index n_;
    std::vector<EntryStatus> status_;
    std::vector<Interval> iv_;
};

namespace detail {

struct MinorBound {
    Interval interval;
    bool pivot_degenerate = false;
    bool inconsistent = false;
};

// Nonnegativity of the (j,k,l) principal 3x3 minor confines r_(j,l) to the
// interval between the two roots of a downward parabola. Interval inputs
// propagate by the worst-case envelope: products over box corners, the root
// term maximized at the corner nearest zero.
inline MinorBound minor_bound_impl(const PartialRealSymmetric& r, Eigen::Index j, Eigen::Index k,
                                   Eigen::Index l) {
    MinorBound out;
    const double tjj = r.known_value(j, j);
    const double tkk = r.known_value(k, k);
    const double tll = r.known_value(l, l);
    if (tkk <= 1e-14) {
        out.pivot_degenerate = true;
        return out;
    }
    const Interval a = r.interval(j, k);
    const Interval b = r.interval(k, l);

    const double astar = a.contains(0.0) ? 0.0 : std::min(std::abs(a.lo), std::abs(a.hi));
    const double bstar = b.contains(0.0) ? 0.0 : std::min(std::abs(b.lo), std::abs(b.hi));
    const double rad_a = tjj * tkk - sqr(astar);
    const double rad_b = tkk * tll - sqr(bstar);
    if (rad_a < 0 || rad_b < 0) {
        out.inconsistent = true; // every point of the input box violates a 2x2 minor
        return out;
    }
    const double root = std::sqrt(rad_a * rad_b);
    const double p1 = a.lo * b.lo, p2 = a.lo * b.hi, p3 = a.hi * b.lo, p4 = a.hi * b.hi;
    const double pmin = std::min({p1, p2, p3, p4});
    const double pmax = std::max({p1, p2, p3, p4});
    out.interval = Interval((pmin - root) / tkk, (pmax + root) / tkk);
    return out;
}

} // namespace detail

// Interval for r_(j,l) implied by the (j,k,l) principal minor.
inline Interval minor_bounds(const PartialRealSymmetric& r, Eigen::Index j, Eigen::Index k,
                             Eigen::Index l) {
    if (!r.available(j, k) || !r.available(k, l))
        throw data_error("minor_bounds: r(j,k) and r(k,l) must be known or bounded");
    auto mb = detail::minor_bound_impl(r, j, k, l);
    if (mb.pivot_degenerate) throw data_error("minor_bounds: pivot r(k,k) is numerically zero");
    if (mb.inconsistent) throw data_error("minor_bounds: inputs are inconsistent with positivity");
    return mb.interval;
}

// Applies minor_bounds over all triples until no interval shrinks by more
// than 1e-12 or max_passes is reached. Passes use snapshot semantics: every
// bound in a pass is derived from the state at the start of that pass.
inline PartialRealSymmetric complete(const PartialRealSymmetric& input, int max_passes) {
    if (max_passes < 1) throw config_error("complete: max_passes must be >= 1");
    input.validate();
    PartialRealSymmetric cur = input;
    const Eigen::Index n = cur.dim();

    for (int pass = 0; pass < max_passes; ++pass) {
        PartialRealSymmetric next = cur;
        double shrink = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            for (Eigen::Index l = j + 1; l < n; ++l) {
                Interval acc = next.interval(j, l);
                bool improved = false;
                for (Eigen::Index k = 0; k < n; ++k) {
                    if (k == j || k == l) continue;
                    if (!cur.available(j, k) || !cur.available(k, l)) continue;
                    auto mb = detail::minor_bound_impl(cur, j, k, l);
                    if (mb.pivot_degenerate) continue;
                    if (mb.inconsistent)
                        throw data_error("complete: inconsistent data at triple (" +
                                         std::to_string(j) + "," + std::to_string(k) + "," +
                                         std::to_string(l) + ")");
                    Interval merged = acc.intersect(mb.interval);
                    if (merged.empty(1e-12))
                        throw data_error("complete: empty intersection at triple (" +
                                         std::to_string(j) + "," + std::to_string(k) + "," +
                                         std::to_string(l) + ")");
                    if (merged.lo > merged.hi) merged = Interval::point(0.5 * (merged.lo + merged.hi));
                    improved = true;
                    acc = merged;
                }
                if (!improved) continue;
                if (cur.status(j, l) == EntryStatus::Known) {
                    if (!acc.contains(cur.known_value(j, l), 1e-10))
                        throw data_error("complete: known entry (" + std::to_string(j) + "," +
                                         std::to_string(l) + ") falls outside its derived bounds");
                    continue; // measured data is never modified
                }
                const Interval before = next.interval(j, l);
                if (before.bounded() && acc.bounded())
                    shrink = std::max(shrink, before.width() - acc.width());
                else if (acc.bounded())
                    shrink = std::max(shrink, 1.0); // first finite bound counts as progress
                next.set_interval(j, l, acc.lo, acc.hi);
            }
        }
        cur = std::move(next);
        if (shrink <= 1e-12) break;
    }
    return cur;
}

} // namespace hdqkd
