#pragma once

#include <cassert>
#include <cmath>
#include <vector>

#include "specwell/common.hpp"

namespace specwell {

/// C2 cubic spline with not-a-knot end conditions.
class CubicSpline {
  public:
    CubicSpline() = default;

    CubicSpline(std::vector<double> x, std::vector<double> y)
        : x_(std::move(x)), y_(std::move(y)) {
        const std::size_t n = x_.size();
        if (n < 2 || y_.size() != n) throw input_error("spline: need >= 2 nodes");
        for (std::size_t i = 1; i < n; ++i)
            if (!(x_[i] > x_[i - 1])) throw input_error("spline: x not strictly increasing");
        if (n == 2) {
            m_ = {slope(0), slope(0)};
            return;
        }
        if (n == 3) {
            // single parabola through three points
            m_.resize(3);
            double h0 = x_[1] - x_[0], h1 = x_[2] - x_[1];
            double d0 = slope(0), d1 = slope(1);
            double c = (d1 - d0) / (h0 + h1);
            m_[0] = d0 - c * h0;
            m_[1] = d0 + c * h0;
            m_[2] = d1 + c * h1;
            return;
        }
        solve_notaknot();
    }

    double x_min() const { return x_.front(); }
    double x_max() const { return x_.back(); }
    const std::vector<double>& xs() const { return x_; }
    const std::vector<double>& ys() const { return y_; }

    /// Evaluate the spline or its first/second derivative. Extrapolates with
    /// the boundary cubic.
    double eval(double x, int deriv = 0) const {
        const std::size_t i = interval(x);
        const double h = x_[i + 1] - x_[i];
        const double t = (x - x_[i]) / h;
        const double y0 = y_[i], y1 = y_[i + 1], m0 = m_[i] * h, m1 = m_[i + 1] * h;
        // Hermite basis
        switch (deriv) {
            case 0: {
                double t2 = t * t, t3 = t2 * t;
                return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * m0 +
                       (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * m1;
            }
            case 1: {
                double t2 = t * t;
                return ((6 * t2 - 6 * t) * y0 + (3 * t2 - 4 * t + 1) * m0 +
                        (-6 * t2 + 6 * t) * y1 + (3 * t2 - 2 * t) * m1) / h;
            }
            case 2:
                return ((12 * t - 6) * y0 + (6 * t - 4) * m0 + (-12 * t + 6) * y1 +
                        (6 * t - 2) * m1) / (h * h);
            default:
                throw input_error("spline: derivative order must be 0, 1 or 2");
        }
    }
    double operator()(double x) const { return eval(x); }

  private:
    double slope(std::size_t i) const { return (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]); }

    std::size_t interval(double x) const {
        if (x <= x_[1]) return 0;
        if (x >= x_[x_.size() - 2]) return x_.size() - 2;
        auto it = std::upper_bound(x_.begin(), x_.end(), x);
        return static_cast<std::size_t>(it - x_.begin()) - 1;
    }

    void solve_notaknot() {
        const std::size_t n = x_.size();
        std::vector<double> a(n), b(n), c(n), r(n);
        std::vector<double> h(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) h[i] = x_[i + 1] - x_[i];
        // interior rows: standard C2 conditions on node slopes m
        for (std::size_t i = 1; i + 1 < n; ++i) {
            a[i] = h[i];
            b[i] = 2.0 * (h[i - 1] + h[i]);
            c[i] = h[i - 1];
            r[i] = 3.0 * (h[i] * slope(i - 1) + h[i - 1] * slope(i));
        }
        // not-a-knot: third derivative continuous across x1 and x_{n-2}
        b[0] = h[1];
        c[0] = h[0] + h[1];
        r[0] = ((h[0] + 2 * (h[0] + h[1])) * h[1] * slope(0) + h[0] * h[0] * slope(1)) /
               (h[0] + h[1]);
        a[n - 1] = h[n - 2] + h[n - 3];
        b[n - 1] = h[n - 3];
        r[n - 1] = (h[n - 2] * h[n - 2] * slope(n - 3) +
                    (2 * (h[n - 3] + h[n - 2]) + h[n - 2]) * h[n - 3] * slope(n - 2)) /
                   (h[n - 3] + h[n - 2]);
        // Thomas solve
        m_.assign(n, 0.0);
        std::vector<double> cp(n), rp(n);
        cp[0] = c[0] / b[0];
        rp[0] = r[0] / b[0];
        for (std::size_t i = 1; i < n; ++i) {
            double den = b[i] - a[i] * cp[i - 1];
            cp[i] = (i + 1 < n ? c[i] : 0.0) / den;
            rp[i] = (r[i] - a[i] * rp[i - 1]) / den;
        }
        m_[n - 1] = rp[n - 1];
        for (std::size_t i = n - 1; i-- > 0;) m_[i] = rp[i] - cp[i] * m_[i + 1];
    }

    std::vector<double> x_, y_, m_;  // node slopes
};

/// Monotone (Fritsch-Carlson) cubic Hermite interpolant. Keeps the data's
/// monotonicity, which the quantization root finder relies on.
class Pchip {
  public:
    Pchip() = default;

    Pchip(std::vector<double> x, std::vector<double> y)
        : x_(std::move(x)), y_(std::move(y)) {
        const std::size_t n = x_.size();
        if (n < 2 || y_.size() != n) throw input_error("pchip: need >= 2 nodes");
        m_.assign(n, 0.0);
        if (n == 2) {
            m_[0] = m_[1] = d(0);
            return;
        }
        for (std::size_t i = 1; i + 1 < n; ++i) {
            double d0 = d(i - 1), d1 = d(i);
            if (d0 * d1 <= 0.0) {
                m_[i] = 0.0;
            } else {
                double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
                double w1 = 2 * h1 + h0, w2 = h1 + 2 * h0;
                m_[i] = (w1 + w2) / (w1 / d0 + w2 / d1);
            }
        }
        m_[0] = end_slope(d(0), d(1), x_[1] - x_[0], x_[2] - x_[1]);
        m_[n - 1] = end_slope(d(n - 2), d(n - 3), x_[n - 1] - x_[n - 2], x_[n - 2] - x_[n - 3]);
    }

    double x_min() const { return x_.front(); }
    double x_max() const { return x_.back(); }

    double eval(double x, int deriv = 0) const {
        std::size_t i = interval(x);
        double h = x_[i + 1] - x_[i];
        double t = (x - x_[i]) / h;
        double y0 = y_[i], y1 = y_[i + 1], m0 = m_[i] * h, m1 = m_[i + 1] * h;
        if (deriv == 0) {
            double t2 = t * t, t3 = t2 * t;
            return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * m0 +
                   (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * m1;
        }
        double t2 = t * t;
        return ((6 * t2 - 6 * t) * y0 + (3 * t2 - 4 * t + 1) * m0 + (-6 * t2 + 6 * t) * y1 +
                (3 * t2 - 2 * t) * m1) / h;
    }
    double operator()(double x) const { return eval(x); }

  private:
    double d(std::size_t i) const { return (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]); }

    static double end_slope(double d0, double d1, double h0, double h1) {
        double m = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if (m * d0 <= 0) return 0.0;
        if (d0 * d1 < 0 && std::abs(m) > 3 * std::abs(d0)) return 3 * d0;
        return m;
    }

    std::size_t interval(double x) const {
        if (x <= x_[1]) return 0;
        if (x >= x_[x_.size() - 2]) return x_.size() - 2;
        auto it = std::upper_bound(x_.begin(), x_.end(), x);
        return static_cast<std::size_t>(it - x_.begin()) - 1;
    }

    std::vector<double> x_, y_, m_;
};

/// Least-squares polynomial fit (normal equations with column scaling;
/// degrees here stay small).
inline std::vector<double> polyfit(const std::vector<double>& x, const std::vector<double>& y,
                                   int degree) {
    const std::size_t n = x.size();
    const int m = degree + 1;
    if (static_cast<int>(n) < m) throw input_error("polyfit: underdetermined");
    // center/scale for conditioning
    double x0 = 0, sc = 0;
    for (double v : x) x0 += v;
    x0 /= static_cast<double>(n);
    for (double v : x) sc = std::max(sc, std::abs(v - x0));
    if (sc == 0) sc = 1;
    std::vector<double> A(m * m, 0.0), b(m, 0.0), pw(2 * m - 1, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        double t = (x[k] - x0) / sc, p = 1;
        for (int j = 0; j < 2 * m - 1; ++j) {
            pw[j] += p;
            p *= t;
        }
        p = 1;
        for (int j = 0; j < m; ++j) {
            b[j] += y[k] * p;
            p *= t;
        }
    }
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) A[i * m + j] = pw[i + j];
    // Gaussian elimination with partial pivoting
    std::vector<int> piv(m);
    for (int i = 0; i < m; ++i) piv[i] = i;
    for (int col = 0; col < m; ++col) {
        int best = col;
        for (int rr = col + 1; rr < m; ++rr)
            if (std::abs(A[rr * m + col]) > std::abs(A[best * m + col])) best = rr;
        for (int j = 0; j < m; ++j) std::swap(A[col * m + j], A[best * m + j]);
        std::swap(b[col], b[best]);
        double p = A[col * m + col];
        if (p == 0) throw numeric_error("polyfit: singular normal equations");
        for (int rr = col + 1; rr < m; ++rr) {
            double f = A[rr * m + col] / p;
            for (int j = col; j < m; ++j) A[rr * m + j] -= f * A[col * m + j];
            b[rr] -= f * b[col];
        }
    }
    std::vector<double> c(m);
    for (int i = m - 1; i >= 0; --i) {
        double s = b[i];
        for (int j = i + 1; j < m; ++j) s -= A[i * m + j] * c[j];
        c[i] = s / A[i * m + i];
    }
    // un-scale: return coefficients in t=(x-x0)/sc basis plus the transform,
    // packaged as a plain closure-friendly vector: callers use polyval below.
    c.push_back(x0);
    c.push_back(sc);
    return c;
}

inline double polyval(const std::vector<double>& c, double x, int deriv = 0) {
    const int m = static_cast<int>(c.size()) - 2;
    const double x0 = c[c.size() - 2], sc = c[c.size() - 1];
    double t = (x - x0) / sc;
    double v = 0;
    if (deriv == 0) {
        for (int j = m - 1; j >= 0; --j) v = v * t + c[j];
        return v;
    }
    if (deriv == 1) {
        for (int j = m - 1; j >= 1; --j) v = v * t + j * c[j];
        return v / sc;
    }
    for (int j = m - 1; j >= 2; --j) v = v * t + j * (j - 1) * c[j];
    return v / (sc * sc);
}

/// Straight-line least squares; returns {intercept, slope}.
inline std::pair<double, double> linear_fit(const std::vector<double>& x,
                                            const std::vector<double>& y) {
    auto c = polyfit(x, y, 1);
    double slope = polyval(c, 1.0) - polyval(c, 0.0);
    double icpt = polyval(c, 0.0);
    return {icpt, slope};
}

}  // namespace specwell
