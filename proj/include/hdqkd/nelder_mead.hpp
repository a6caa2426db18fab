#pragma once

#include "hdqkd/core.hpp"

#include <functional>
#include <vector>

namespace hdqkd {

struct NelderMeadOptions {
    int max_evals = 2000;
    double rel_tol = 1e-8;
};

struct NelderMeadResult {
    RealVector x;
    double value = 0.0;
    int evals = 0;
};

namespace detail {

// componentwise projection onto the box [-cap, cap]; empty caps = unbounded
inline void clamp_to_caps(RealVector& x, const RealVector& caps) {
    if (caps.size() != x.size()) return;
    for (Eigen::Index i = 0; i < x.size(); ++i)
        x[i] = std::clamp(x[i], -caps[i], caps[i]);
}

} // namespace detail

// Deterministic Nelder-Mead with the adaptive (dimension-dependent) expansion
// and contraction coefficients. steps gives the initial simplex displacement
// per coordinate; caps, when given, box-constrain the search by projection.
inline NelderMeadResult nelder_mead(const std::function<double(const RealVector&)>& f,
                                    const RealVector& x0, const RealVector& steps,
                                    const NelderMeadOptions& opt = {},
                                    const RealVector& caps = RealVector()) {
    const int n = int(x0.size());
    NelderMeadResult res;
    if (n == 0) {
        res.x = x0;
        res.value = f(x0);
        res.evals = 1;
        return res;
    }
    const double alpha = 1.0;
    const double beta = 1.0 + 2.0 / n;
    const double gamma = 0.75 - 1.0 / (2.0 * n);
    const double delta = 1.0 - 1.0 / n;

    int evals = 0;
    auto eval = [&](const RealVector& x) {
        ++evals;
        return f(x);
    };

    std::vector<RealVector> pts(size_t(n) + 1, x0);
    std::vector<double> vals(size_t(n) + 1);
    detail::clamp_to_caps(pts[0], caps);
    vals[0] = eval(pts[0]);
    for (int i = 0; i < n; ++i) {
        pts[size_t(i) + 1][i] += (steps[i] != 0.0 ? steps[i] : 1.0);
        detail::clamp_to_caps(pts[size_t(i) + 1], caps);
        vals[size_t(i) + 1] = eval(pts[size_t(i) + 1]);
    }

    std::vector<int> order(size_t(n) + 1);
    auto sort_simplex = [&] {
        for (int i = 0; i <= n; ++i) order[size_t(i)] = i;
        std::sort(order.begin(), order.end(), [&](int a, int b) { return vals[size_t(a)] < vals[size_t(b)]; });
    };

    while (evals < opt.max_evals) {
        sort_simplex();
        const int best = order[0], worst = order[size_t(n)], second_worst = order[size_t(n) - 1];
        if (vals[size_t(worst)] - vals[size_t(best)] <=
            opt.rel_tol * (std::abs(vals[size_t(best)]) + opt.rel_tol))
            break;

        RealVector centroid = RealVector::Zero(n);
        for (int i = 0; i <= n; ++i)
            if (i != worst) centroid += pts[size_t(i)];
        centroid /= double(n);

        RealVector xr = centroid + alpha * (centroid - pts[size_t(worst)]);
        detail::clamp_to_caps(xr, caps);
        const double fr = eval(xr);
        if (fr < vals[size_t(best)]) {
            RealVector xe = centroid + beta * (xr - centroid);
            detail::clamp_to_caps(xe, caps);
            const double fe = eval(xe);
            if (fe < fr) {
                pts[size_t(worst)] = xe;
                vals[size_t(worst)] = fe;
            } else {
                pts[size_t(worst)] = xr;
                vals[size_t(worst)] = fr;
            }
        } else if (fr < vals[size_t(second_worst)]) {
            pts[size_t(worst)] = xr;
            vals[size_t(worst)] = fr;
        } else {
            const bool outside = fr < vals[size_t(worst)];
            RealVector xc = outside ? RealVector(centroid + gamma * (xr - centroid))
                                    : RealVector(centroid - gamma * (centroid - pts[size_t(worst)]));
            detail::clamp_to_caps(xc, caps);
            const double fc = eval(xc);
            if (fc < std::min(fr, vals[size_t(worst)])) {
                pts[size_t(worst)] = xc;
                vals[size_t(worst)] = fc;
            } else {
                for (int i = 1; i <= n; ++i) {
                    const int idx = order[size_t(i)];
                    pts[size_t(idx)] = pts[size_t(best)] + delta * (pts[size_t(idx)] - pts[size_t(best)]);
                    vals[size_t(idx)] = eval(pts[size_t(idx)]);
                }
            }
        }
    }

    sort_simplex();
    res.x = pts[size_t(order[0])];
    res.value = vals[size_t(order[0])];
    res.evals = evals;
    return res;
}

// Cyclic per-coordinate descent: march with doubling steps while improving,
// then shrink. Cheap polish stage after the simplex converges.
inline NelderMeadResult coordinate_polish(const std::function<double(const RealVector&)>& f,
                                          RealVector x, const RealVector& scales, int rounds,
                                          int max_evals, const RealVector& caps = RealVector()) {
    int evals = 0;
    detail::clamp_to_caps(x, caps);
    double fx = f(x);
    ++evals;
    const int n = int(x.size());
    for (int round = 0; round < rounds; ++round) {
        for (int i = 0; i < n && evals < max_evals; ++i) {
            double h = scales[i] != 0.0 ? scales[i] : 1.0;
            for (int shrink = 0; shrink < 40 && evals + 2 < max_evals; ++shrink) {
                bool moved = false;
                for (double dir : {+1.0, -1.0}) {
                    RealVector trial = x;
                    trial[i] += dir * h;
                    detail::clamp_to_caps(trial, caps);
                    if (trial[i] == x[i]) continue;
                    const double ft = f(trial);
                    ++evals;
                    if (ft < fx) {
                        x = trial;
                        fx = ft;
                        moved = true;
                        // march while it keeps improving
                        while (evals < max_evals) {
                            h *= 2.0;
                            RealVector t2 = x;
                            t2[i] += dir * h;
                            detail::clamp_to_caps(t2, caps);
                            if (t2[i] == x[i]) break;
                            const double f2 = f(t2);
                            ++evals;
                            if (f2 < fx) {
                                x = t2;
                                fx = f2;
                            } else {
                                h *= 0.5;
                                break;
                            }
                        }
                        break;
                    }
                }
                if (!moved) h *= 0.25;
                if (h < 1e-12 * (std::abs(x[i]) + 1.0)) break;
            }
        }
    }
    return NelderMeadResult{std::move(x), fx, evals};
}

} // namespace hdqkd
