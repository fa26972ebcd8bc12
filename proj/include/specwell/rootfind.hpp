#pragma once

#include <cmath>
#include <functional>
#include <limits>

#include "specwell/common.hpp"

namespace specwell {

/// Brent's method on a sign-changing bracket [a,b].
template <class F>
double brent(const F& f, double a, double b, double xtol = 1e-14, int max_iter = 200) {
    double fa = f(a), fb = f(b);
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if (fa * fb > 0.0) throw numeric_error("brent: no sign change in bracket");
    double c = a, fc = fa, d = b - a, e = d;
    for (int it = 0; it < max_iter; ++it) {
        if (std::abs(fc) < std::abs(fb)) {
            a = b; b = c; c = a;
            fa = fb; fb = fc; fc = fa;
        }
        double tol1 = 2.0 * std::numeric_limits<double>::epsilon() * std::abs(b) + 0.5 * xtol;
        double xm = 0.5 * (c - b);
        if (std::abs(xm) <= tol1 || fb == 0.0) return b;
        if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
            double s = fb / fa, p, q;
            if (a == c) {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                double qq = fa / fc, r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0.0) q = -q;
            p = std::abs(p);
            if (2.0 * p < std::min(3.0 * xm * q - std::abs(tol1 * q), std::abs(e * q))) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += (std::abs(d) > tol1) ? d : (xm > 0 ? tol1 : -tol1);
        fb = f(b);
        if ((fb > 0) == (fc > 0)) {
            c = a; fc = fa; d = b - a; e = d;
        }
    }
    return b;
}

/// Expand/scan for a sign change of f on [a,b]; returns true with the bracket.
template <class F>
bool scan_bracket(const F& f, double a, double b, int n, double& lo, double& hi) {
    double x0 = a, f0 = f(a);
    for (int i = 1; i <= n; ++i) {
        double x1 = a + (b - a) * static_cast<double>(i) / n;
        double f1 = f(x1);
        if (f0 == 0.0) { lo = hi = x0; return true; }
        if (f0 * f1 <= 0.0) {
            lo = x0; hi = x1;
            return true;
        }
        x0 = x1;
        f0 = f1;
    }
    return false;
}

}  // namespace specwell
