#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>
#include <cmath>
#include <limits>

namespace hdqkd {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using RealMatrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

constexpr double kTraceTol = 1e-12;
constexpr double kPsdTol = 1e-10;
constexpr double kFeasTol = 1e-9;
constexpr double kObjectiveTol = 1e-10;
constexpr double kSandwichTol = 1e-7;

// Error categories; the CLI maps them onto exit codes.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct internal_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Closed interval [lo, hi]; used for completion output and witness expectations.
struct Interval {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();

    Interval() = default;
    Interval(double l, double h) : lo(l), hi(h) {}
    static Interval point(double v) { return {v, v}; }

    double width() const { return hi - lo; }
    bool contains(double v, double tol = 0.0) const { return v >= lo - tol && v <= hi + tol; }
    bool bounded() const { return std::isfinite(lo) && std::isfinite(hi); }

    Interval intersect(const Interval& o) const {
        return {std::max(lo, o.lo), std::min(hi, o.hi)};
    }
    bool empty(double tol = 0.0) const { return lo > hi + tol; }

    // Sound scaling: sign of c decides which endpoint becomes the new lo.
    Interval scaled(double c) const {
        if (c >= 0) return {c * lo, c * hi};
        return {c * hi, c * lo};
    }
    Interval operator+(const Interval& o) const { return {lo + o.lo, hi + o.hi}; }
};

inline double sqr(double x) { return x * x; }

} // namespace hdqkd
