#pragma once

// Plain interval arithmetic over doubles. Soundness here is inclusion
// of the exact real-arithmetic range; we do not chase directed rounding,
// consistent with the sampling-checked contracts used throughout.

#include <algorithm>
#include <cmath>
#include <vector>

#include "kkl/linalg.hpp"

namespace kkl {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    Interval() = default;
    Interval(double v) : lo(v), hi(v) {}
    Interval(double l, double h) : lo(l), hi(h) {}

    static Interval hull(double a, double b) { return {std::min(a, b), std::max(a, b)}; }

    double width() const { return hi - lo; }
    double mid() const { return 0.5 * (lo + hi); }
    bool contains(double v, double slack = 0.0) const { return v >= lo - slack && v <= hi + slack; }
    // largest |value| over the interval
    double max_abs() const { return std::max(std::abs(lo), std::abs(hi)); }
};

inline Interval operator+(Interval a, Interval b) { return {a.lo + b.lo, a.hi + b.hi}; }
inline Interval operator-(Interval a, Interval b) { return {a.lo - b.hi, a.hi - b.lo}; }
inline Interval operator-(Interval a) { return {-a.hi, -a.lo}; }

inline Interval operator*(Interval a, Interval b) {
    const double p1 = a.lo * b.lo, p2 = a.lo * b.hi, p3 = a.hi * b.lo, p4 = a.hi * b.hi;
    return {std::min(std::min(p1, p2), std::min(p3, p4)),
            std::max(std::max(p1, p2), std::max(p3, p4))};
}

inline Interval operator*(double a, Interval b) {
    return a >= 0 ? Interval{a * b.lo, a * b.hi} : Interval{a * b.hi, a * b.lo};
}

inline Interval operator+(Interval a, double b) { return {a.lo + b, a.hi + b}; }
inline Interval operator-(double a, Interval b) { return {a - b.hi, a - b.lo}; }

// x^2 with the monotone-by-parts rule: [0, max(l^2,u^2)] when 0 is inside.
inline Interval square(Interval x) {
    const double l2 = x.lo * x.lo, u2 = x.hi * x.hi;
    if (x.lo <= 0.0 && x.hi >= 0.0) return {0.0, std::max(l2, u2)};
    return {std::min(l2, u2), std::max(l2, u2)};
}

// x^3 is monotone, endpoints are exact.
inline Interval cube(Interval x) { return {x.lo * x.lo * x.lo, x.hi * x.hi * x.hi}; }

inline Interval tanh_interval(Interval x) { return {std::tanh(x.lo), std::tanh(x.hi)}; }

// Intersection, assumed nonempty; callers intersect two sound enclosures of
// the same quantity so emptiness can only come from roundoff — clamp instead.
inline Interval intersect(Interval a, Interval b) {
    Interval r{std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
    if (r.lo > r.hi) r.lo = r.hi = 0.5 * (r.lo + r.hi);
    return r;
}

using IntervalVec = std::vector<Interval>;

inline IntervalVec operator+(const IntervalVec& a, const IntervalVec& b) {
    IntervalVec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

inline IntervalVec operator-(const IntervalVec& a, const IntervalVec& b) {
    IntervalVec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

// point matrix * interval vector
inline IntervalVec matvec(const DenseMatrix& m, const IntervalVec& x) {
    IntervalVec y(m.rows);
    for (int i = 0; i < m.rows; ++i) {
        Interval s(0.0);
        for (int j = 0; j < m.cols; ++j) s = s + m(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

// Interval matrix as a pair of elementwise bounds.
struct IntervalMatrix {
    DenseMatrix lo;
    DenseMatrix hi;

    IntervalMatrix() = default;
    IntervalMatrix(int r, int c) : lo(r, c), hi(r, c) {}
    explicit IntervalMatrix(const DenseMatrix& exact) : lo(exact), hi(exact) {}

    int rows() const { return lo.rows; }
    int cols() const { return lo.cols; }
    Interval at(int i, int j) const { return {lo(i, j), hi(i, j)}; }
    void set(int i, int j, Interval v) {
        lo(i, j) = v.lo;
        hi(i, j) = v.hi;
    }
    // elementwise max |.|, used for norm bounds
    DenseMatrix max_abs() const {
        DenseMatrix m(rows(), cols());
        for (std::size_t i = 0; i < m.a.size(); ++i)
            m.a[i] = std::max(std::abs(lo.a[i]), std::abs(hi.a[i]));
        return m;
    }
};

inline IntervalMatrix matmul(const IntervalMatrix& a, const IntervalMatrix& b) {
    IntervalMatrix c(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < b.cols(); ++j) {
            Interval s(0.0);
            for (int k = 0; k < a.cols(); ++k) s = s + a.at(i, k) * b.at(k, j);
            c.set(i, j, s);
        }
    return c;
}

inline IntervalVec matvec(const IntervalMatrix& m, const IntervalVec& x) {
    IntervalVec y(m.rows());
    for (int i = 0; i < m.rows(); ++i) {
        Interval s(0.0);
        for (int j = 0; j < m.cols(); ++j) s = s + m.at(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

// Euclidean-norm upper bound of a vector ranging over an interval box:
// sqrt(sum_i max(l_i^2, u_i^2)).
inline double norm2_upper(const IntervalVec& v) {
    double s = 0.0;
    for (const Interval& iv : v) {
        const double m = iv.max_abs();
        s += m * m;
    }
    return std::sqrt(s);
}

}  // namespace kkl
