#pragma once

#include "hdqkd/core.hpp"
#include "hdqkd/nelder_mead.hpp"
#include "hdqkd/spectra.hpp"
#include "hdqkd/witness.hpp"

#include <memory>
#include <optional>
#include <thread>
#include <vector>

namespace hdqkd {

// Multipliers of the dual program: y per equality constraint, (zL, zU) >= 0
// per interval constraint. y0 is not stored; it is always set to the optimal
// max_ell lambda_max(M_ell), which keeps every visited point feasible.
struct DualPoint {
    RealVector y;
    RealVector z_lower;
    RealVector z_upper;
};

struct IterationRecord {
    int start_index = 0;
    int evals = 0;
    double best_value = 0.0;
};

struct GuessBound {
    double p_guess_ub = 1.0;
    DualPoint point;
    RealVector lambda_per_ell;
    std::vector<IterationRecord> objective_trace;
    bool fast_path_used = false;
};

struct SolverOptions {
    uint64_t seed = 1;
    int starts = 8;
    int max_evals_per_start = 2000;
    double rel_tol = 1e-8;
    bool fast_path = true;
    bool polish = true;
    int jobs = 1;
    std::optional<DualPoint> warm_start;
};

namespace detail {

inline double lambda_max_value(const Matrix& m) {
    const Eigen::Index n = m.rows();
    if (m.imag().cwiseAbs().maxCoeff() == 0.0)
        return jacobi_eigensystem(m.real()).evals[n - 1];
    return jacobi_eigensystem(real_embedding(m)).evals[2 * n - 1];
}

} // namespace detail

// M_ell = |ell><ell| (x) Id - sum_k y_k conj(W_k) - sum_j (zU_j - zL_j) conj(W_j).
inline Matrix assemble_m(Eigen::Index ell, Eigen::Index d,
                         const std::vector<WitnessConstraint>& constraints,
                         const DualPoint& point) {
    if (ell < 0 || ell >= d) throw config_error("assemble_m: ell out of range");
    Matrix m = Matrix::Zero(d * d, d * d);
    for (Eigen::Index j = 0; j < d; ++j) m(ell * d + j, ell * d + j) = 1.0;
    Eigen::Index ke = 0, ki = 0;
    for (const auto& c : constraints) {
        if (c.op.dim != d) throw config_error("assemble_m: witness dimension mismatch");
        const double coeff = c.is_equality ? point.y[ke++] : (point.z_upper[ki] - point.z_lower[ki]);
        if (!c.is_equality) ++ki;
        if (coeff == 0.0) continue;
        m -= coeff * c.op.materialize().conjugate();
    }
    return m;
}

// Shared evaluation core for the dual objective. Variable layout:
// [y_0..y_{ne-1}, sL_0..sL_{ni-1}, sU_0..sU_{ni-1}] with z = s^2.
class DualObjective {
public:
    DualObjective(std::vector<WitnessConstraint> constraints, bool allow_fast_path)
        : constraints_(std::move(constraints)) {
        d_ = constraints_.empty() ? 0 : constraints_.front().op.dim;
        for (const auto& c : constraints_) {
            if (c.op.dim != d_) throw config_error("dual solver: witness dimension mismatch");
            if (c.is_equality)
                eq_.push_back(&c);
            else
                iv_.push_back(&c);
            structured_ &= c.op.sector_structured();
        }
        // The blocked two-witness structure: one band witness, one pair
        // projector, nothing else. Q's eigenvectors are multiplier-independent.
        if (allow_fast_path && constraints_.size() == 2) {
            const WitnessOperator* band = nullptr;
            const WitnessOperator* pair = nullptr;
            for (const auto& c : constraints_) {
                if (c.op.kind == WitnessOperator::Kind::BandToeplitz) band = &c.op;
                if (c.op.kind == WitnessOperator::Kind::PairProjector) pair = &c.op;
            }
            if (band && pair) pair_eval_ = std::make_unique<PairSectorEvaluator>(band->q);
        }
    }

    Eigen::Index dim() const { return d_; }
    int n_eq() const { return int(eq_.size()); }
    int n_iv() const { return int(iv_.size()); }
    int n_vars() const { return n_eq() + 2 * n_iv(); }
    const std::vector<WitnessConstraint>& constraints() const { return constraints_; }
    bool fast_path() const { return pair_eval_ != nullptr; }

    DualPoint decode(const RealVector& x) const {
        DualPoint p;
        p.y = x.head(n_eq());
        p.z_lower = x.segment(n_eq(), n_iv()).array().square();
        p.z_upper = x.tail(n_iv()).array().square();
        return p;
    }

    RealVector encode(const DualPoint& p) const {
        RealVector x(n_vars());
        x.head(n_eq()) = p.y;
        x.segment(n_eq(), n_iv()) = p.z_lower.cwiseMax(0.0).cwiseSqrt();
        x.tail(n_iv()) = p.z_upper.cwiseMax(0.0).cwiseSqrt();
        return x;
    }

    // Per-constraint multiplier scale 1/||W||_F, used for start generation.
    RealVector variable_scales() const {
        RealVector s(n_vars());
        int k = 0;
        for (const auto* c : eq_) s[k++] = 1.0 / std::max(c->op.frobenius_norm(), 1e-12);
        for (int rep = 0; rep < 2; ++rep)
            for (const auto* c : iv_)
                s[k++] = std::sqrt(1.0 / std::max(c->op.frobenius_norm(), 1e-12));
        return s;
    }

    // Box limits keeping |multiplier| * ||W||_F <= kMultiplierCap. Beyond that
    // the dual value loses more to double-precision cancellation than the
    // remaining gap is worth.
    static constexpr double kMultiplierCap = 1e6;
    RealVector variable_caps() const {
        RealVector caps = variable_scales();
        for (int i = 0; i < n_eq(); ++i) caps[i] *= kMultiplierCap;
        for (int i = n_eq(); i < n_vars(); ++i) caps[i] *= std::sqrt(kMultiplierCap);
        return caps;
    }

    double linear_term(const DualPoint& p) const {
        double acc = 0.0;
        for (size_t k = 0; k < eq_.size(); ++k) acc += p.y[Eigen::Index(k)] * eq_[k]->w;
        for (size_t j = 0; j < iv_.size(); ++j)
            acc += p.z_upper[Eigen::Index(j)] * iv_[j]->bounds.hi -
                   p.z_lower[Eigen::Index(j)] * iv_[j]->bounds.lo;
        return acc;
    }

    // Net multiplier per constraint, in constraint order.
    RealVector net_coeffs(const DualPoint& p) const {
        RealVector c(Eigen::Index(constraints_.size()));
        Eigen::Index ke = 0, ki = 0;
        for (Eigen::Index i = 0; i < c.size(); ++i) {
            if (constraints_[size_t(i)].is_equality)
                c[i] = p.y[ke++];
            else {
                c[i] = p.z_upper[ki] - p.z_lower[ki];
                ++ki;
            }
        }
        return c;
    }

    double max_lambda(const DualPoint& p) const {
        RealVector lam = lambda_per_ell(p, true);
        return lam.maxCoeff();
    }

    // all_ell = false allows the persymmetry shortcut in pair mode.
    RealVector lambda_per_ell(const DualPoint& p, bool reduced) const {
        const RealVector coeff = net_coeffs(p);
        if (d_ == 0) throw config_error("dual solver: no constraints define the dimension");
        double tau_p = 0.0;
        for (size_t i = 0; i < constraints_.size(); ++i)
            tau_p += coeff[Eigen::Index(i)] * constraints_[i].op.pair_coefficient();
        const double branch = std::max(1.0 - tau_p, -tau_p);

        if (pair_eval_) {
            double y1 = 0.0;
            for (size_t i = 0; i < constraints_.size(); ++i)
                if (constraints_[i].op.kind == WitnessOperator::Kind::BandToeplitz)
                    y1 = coeff[Eigen::Index(i)];
            if (reduced) {
                RealVector lam(1);
                lam[0] = std::max(pair_eval_->max_over_ell(y1), branch);
                return lam;
            }
            RealVector lam(d_);
            for (Eigen::Index ell = 0; ell < d_; ++ell)
                lam[ell] = std::max(pair_eval_->lambda_max(ell, y1), branch);
            return lam;
        }
        if (structured_) {
            RealMatrix minus_g = RealMatrix::Zero(d_, d_);
            for (size_t i = 0; i < constraints_.size(); ++i)
                if (coeff[Eigen::Index(i)] != 0.0)
                    constraints_[i].op.add_to_sector(minus_g, -coeff[Eigen::Index(i)]);
            SectorEvaluator eval(minus_g);
            RealVector lam(d_);
            for (Eigen::Index ell = 0; ell < d_; ++ell)
                lam[ell] = std::max(eval.lambda_max(ell), branch);
            return lam;
        }
        // dense fallback: structure-free assembly per ell
        RealVector lam(d_);
        for (Eigen::Index ell = 0; ell < d_; ++ell)
            lam[ell] = detail::lambda_max_value(assemble_m(ell, d_, constraints_, p));
        return lam;
    }

    double operator()(const RealVector& x) const {
        const DualPoint p = decode(x);
        return max_lambda(p) + linear_term(p);
    }

    // Per-start interpolation cache for the pair mode, where the sector
    // eigenvalue term is a 1-D convex function of the band multiplier. The
    // chord over cached exact points bounds it from above, secant
    // extrapolations from below; only queries with a certified gap above
    // 1e-11 trigger an exact solve. Sound because the emitted bound is always
    // recomputed exactly.
    struct SectorCache {
        std::map<double, double> pts;
    };

    double eval_cached(const RealVector& x, SectorCache& cache) const {
        const DualPoint p = decode(x);
        if (!pair_eval_) return max_lambda(p) + linear_term(p);

        const RealVector coeff = net_coeffs(p);
        double tau_p = 0.0, y1 = 0.0;
        for (size_t i = 0; i < constraints_.size(); ++i) {
            tau_p += coeff[Eigen::Index(i)] * constraints_[i].op.pair_coefficient();
            if (constraints_[i].op.kind == WitnessOperator::Kind::BandToeplitz)
                y1 = coeff[Eigen::Index(i)];
        }
        const double g = cached_sector_max(y1, cache);
        return std::max({g, 1.0 - tau_p, -tau_p}) + linear_term(p);
    }

private:
    double cached_sector_max(double y1, SectorCache& cache) const {
        auto& pts = cache.pts;
        auto hit = pts.find(y1);
        if (hit != pts.end()) return hit->second;
        auto right = pts.lower_bound(y1);
        if (right != pts.end() && right != pts.begin()) {
            auto left = std::prev(right);
            const double xa = left->first, ga = left->second;
            const double xb = right->first, gb = right->second;
            const double chord = ga + (gb - ga) * (y1 - xa) / (xb - xa);
            double support = -std::numeric_limits<double>::infinity();
            if (left != pts.begin()) {
                auto left2 = std::prev(left);
                const double slope = (ga - left2->second) / (xa - left2->first);
                support = std::max(support, ga + slope * (y1 - xa));
            }
            if (std::next(right) != pts.end()) {
                auto right2 = std::next(right);
                const double slope = (right2->second - gb) / (right2->first - xb);
                support = std::max(support, gb + slope * (y1 - xb));
            }
            if (chord - support <= 1e-11 * (1.0 + std::abs(chord))) return chord;
        }
        const double exact = pair_eval_->max_over_ell(y1);
        pts.emplace(y1, exact);
        return exact;
    }

public:

private:
    std::vector<WitnessConstraint> constraints_;
    std::vector<const WitnessConstraint*> eq_;
    std::vector<const WitnessConstraint*> iv_;
    Eigen::Index d_ = 0;
    bool structured_ = true;
    std::unique_ptr<PairSectorEvaluator> pair_eval_;
};

// Dual objective at an explicit feasible point. Every returned value is a
// certified upper bound on the guessing probability.
inline double objective(const DualPoint& point, const std::vector<WitnessConstraint>& constraints) {
    if ((point.z_lower.size() && point.z_lower.minCoeff() < 0) ||
        (point.z_upper.size() && point.z_upper.minCoeff() < 0))
        throw data_error("objective: interval multipliers must be nonnegative");
    DualObjective obj(constraints, true);
    return obj.max_lambda(point) + obj.linear_term(point);
}

struct CertificateReport {
    bool pass = false;
    bool z_nonnegative = false;
    bool dense_path = false;
    double worst_slack = 0.0;     // min over ell of y0 - lambda_max(M_ell)
    Eigen::Index worst_ell = -1;
    double objective_gap = 0.0;   // |stored - recomputed|
    double slack_tolerance = kFeasTol;
    std::string detail;
};

// Recomputes the feasibility certificate of an emitted bound. For d <= 32 the
// eigenvalues come from the structure-blind dense path (power iteration with a
// Jacobi fallback on residual failure); above that the sector path is used.
inline CertificateReport verify_certificate(const GuessBound& bound,
                                            const std::vector<WitnessConstraint>& constraints) {
    CertificateReport rep;
    const Eigen::Index d = constraints.empty() ? 0 : constraints.front().op.dim;
    if (d == 0) throw config_error("verify_certificate: empty constraint list");

    rep.z_nonnegative = (!bound.point.z_lower.size() || bound.point.z_lower.minCoeff() >= 0.0) &&
                        (!bound.point.z_upper.size() || bound.point.z_upper.minCoeff() >= 0.0);

    DualObjective obj(constraints, true);
    const double y0 = bound.p_guess_ub - obj.linear_term(bound.point);

    rep.dense_path = d <= 32;
    rep.worst_slack = std::numeric_limits<double>::infinity();
    for (Eigen::Index ell = 0; ell < d; ++ell) {
        double lam;
        if (rep.dense_path) {
            const Matrix m = assemble_m(ell, d, constraints, bound.point);
            SpectralResult sr = lambda_max_power(m);
            const double fro = m.norm();
            if (sr.residual > 1e-10 * (fro > 0 ? fro : 1.0)) lam = detail::lambda_max_value(m);
            else lam = sr.lambda;
        } else {
            DualPoint p = bound.point;
            lam = obj.lambda_per_ell(p, false)[ell];
        }
        const double slack = y0 - lam;
        if (slack < rep.worst_slack) {
            rep.worst_slack = slack;
            rep.worst_ell = ell;
        }
    }
    const double recomputed = obj.max_lambda(bound.point) + obj.linear_term(bound.point);
    rep.objective_gap = std::abs(recomputed - bound.p_guess_ub);

    // absolute 1e-9 slack whenever the multipliers are well scaled; past that
    // the eigensolves themselves carry n*eps*||M|| noise
    double scale = std::abs(y0) + 1.0;
    {
        const RealVector coeff = obj.net_coeffs(bound.point);
        for (size_t i = 0; i < constraints.size(); ++i)
            scale += std::abs(coeff[Eigen::Index(i)]) * constraints[i].op.frobenius_norm();
    }
    rep.slack_tolerance = std::max(kFeasTol, double(d * d + 32) * 2.3e-16 * scale);

    rep.pass = rep.z_nonnegative && rep.worst_slack >= -rep.slack_tolerance &&
               rep.objective_gap <= kObjectiveTol;
    if (!rep.pass) {
        rep.detail = "certificate failure:";
        if (!rep.z_nonnegative) rep.detail += " negative interval multiplier;";
        if (rep.worst_slack < -rep.slack_tolerance)
            rep.detail += " y0 understated at ell=" + std::to_string(rep.worst_ell) + " by " +
                          std::to_string(-rep.worst_slack) + ";";
        if (rep.objective_gap > kObjectiveTol) rep.detail += " objective not reproduced;";
    }
    return rep;
}

namespace detail {

inline std::vector<RealVector> make_starts(const DualObjective& obj, const SolverOptions& opt,
                                           DualObjective::SectorCache& cache) {
    const int n = obj.n_vars();
    const RealVector scales = obj.variable_scales();
    std::vector<RealVector> starts;
    starts.push_back(RealVector::Zero(n));
    if (opt.warm_start) starts.push_back(obj.encode(*opt.warm_start));

    // coarse per-variable line search from the running best point
    {
        RealVector seed = RealVector::Zero(n);
        double best = obj.eval_cached(seed, cache);
        for (int i = 0; i < n; ++i) {
            double best_xi = seed[i];
            for (int k = 0; k <= 18; k += 2) {
                for (double sign : {+1.0, -1.0}) {
                    RealVector trial = seed;
                    trial[i] = sign * scales[i] * std::ldexp(1.0, k);
                    const double v = obj.eval_cached(trial, cache);
                    if (v < best) {
                        best = v;
                        best_xi = trial[i];
                    }
                }
            }
            seed[i] = best_xi;
        }
        starts.push_back(seed);
    }

    int i = 0;
    double mag = 1.0;
    while (int(starts.size()) < opt.starts) {
        RealVector s = RealVector::Zero(n);
        s[i % n] = ((i / n) % 2 == 0 ? mag : -mag) * scales[i % n];
        starts.push_back(s);
        ++i;
        if (i % (2 * n) == 0) mag *= 4.0;
    }
    starts.resize(size_t(opt.starts) > starts.size() ? starts.size() : size_t(opt.starts));
    if (starts.empty()) starts.push_back(RealVector::Zero(n));
    return starts;
}

} // namespace detail

// Derivative-free minimization of the dual objective over the multipliers.
// Deterministic: fixed start list, simplex, and polish schedule.
inline GuessBound minimize(const std::vector<WitnessConstraint>& constraints,
                           const SolverOptions& opt = {}) {
    GuessBound bound;
    if (constraints.empty()) {
        // only the normalization structure: y0 = lambda_max(|ell><ell| x Id) = 1
        bound.p_guess_ub = 1.0;
        return bound;
    }
    DualObjective obj(constraints, opt.fast_path);
    bound.fast_path_used = obj.fast_path();

    DualObjective::SectorCache seed_cache;
    auto starts = detail::make_starts(obj, opt, seed_cache);
    const RealVector scales = obj.variable_scales();
    const RealVector caps = obj.variable_caps();
    for (auto& s : starts) detail::clamp_to_caps(s, caps);

    struct StartOutcome {
        RealVector x;
        double value;
        int evals;
    };
    std::vector<StartOutcome> outcomes(starts.size());

    auto run_start = [&](size_t s) {
        // every start begins from the same line-search cache; its private copy
        // then evolves with the start's own trajectory, so parallel execution
        // stays deterministic
        DualObjective::SectorCache cache = seed_cache;
        auto eval_fn = [&obj, &cache](const RealVector& x) { return obj.eval_cached(x, cache); };
        NelderMeadOptions nm;
        nm.max_evals = opt.max_evals_per_start;
        nm.rel_tol = opt.rel_tol;
        RealVector steps = scales;
        for (int i = 0; i < steps.size(); ++i)
            steps[i] = std::max(std::abs(starts[s][i]) * 0.25, scales[i]);
        NelderMeadResult r = nelder_mead(eval_fn, starts[s], steps, nm, caps);
        if (opt.polish) {
            NelderMeadResult pr =
                coordinate_polish(eval_fn, r.x, scales, 2,
                                  std::max(200, opt.max_evals_per_start / 2), caps);
            if (pr.value < r.value) {
                r.x = pr.x;
                r.value = pr.value;
            }
            r.evals += pr.evals;
        }
        outcomes[s] = StartOutcome{std::move(r.x), r.value, r.evals};
    };

    if (opt.jobs > 1 && starts.size() > 1) {
        std::vector<std::thread> pool;
        std::atomic<size_t> next{0};
        const int nthreads = std::min<int>(opt.jobs, int(starts.size()));
        for (int t = 0; t < nthreads; ++t)
            pool.emplace_back([&] {
                for (size_t s = next.fetch_add(1); s < starts.size(); s = next.fetch_add(1)) run_start(s);
            });
        for (auto& th : pool) th.join();
    } else {
        for (size_t s = 0; s < starts.size(); ++s) run_start(s);
    }

    size_t best = 0;
    for (size_t s = 1; s < outcomes.size(); ++s)
        if (outcomes[s].value < outcomes[best].value) best = s;
    for (size_t s = 0; s < outcomes.size(); ++s)
        bound.objective_trace.push_back(IterationRecord{int(s), outcomes[s].evals, outcomes[s].value});

    bound.point = obj.decode(outcomes[best].x);
    bound.lambda_per_ell = obj.lambda_per_ell(bound.point, false);
    bound.p_guess_ub = bound.lambda_per_ell.maxCoeff() + obj.linear_term(bound.point);

    if (!(bound.p_guess_ub > 0.0))
        throw internal_error("minimize: nonpositive guessing-probability bound (weak duality broken)");
    if (bound.p_guess_ub > 1.0 + kFeasTol)
        throw internal_error("minimize: bound above 1 despite the zero start");

    // emission check: multipliers feasible, objective reproduced from scratch
    const double recomputed = objective(bound.point, constraints);
    if (std::abs(recomputed - bound.p_guess_ub) > kObjectiveTol)
        throw internal_error("minimize: emitted objective not reproducible");
    return bound;
}

} // namespace hdqkd
