#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "specwell/common.hpp"

namespace specwell {

/// Gauss-Legendre nodes/weights on [-1,1] by Newton iteration on P_n.
struct GaussLegendre {
    std::vector<double> x, w;

    explicit GaussLegendre(int n) {
        x.resize(n);
        w.resize(n);
        const int m = (n + 1) / 2;
        for (int i = 1; i <= m; ++i) {
            double z = std::cos(pi * (i - 0.25) / (n + 0.5));
            double z1, pp;
            do {
                double p1 = 1.0, p2 = 0.0;
                for (int j = 1; j <= n; ++j) {
                    double p3 = p2;
                    p2 = p1;
                    p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
                }
                pp = n * (z * p1 - p2) / (z * z - 1.0);
                z1 = z;
                z = z1 - p1 / pp;
            } while (std::abs(z - z1) > 1e-15);
            x[i - 1] = -z;
            x[n - i] = z;
            w[i - 1] = 2.0 / ((1.0 - z * z) * pp * pp);
            w[n - i] = w[i - 1];
        }
    }

    static const GaussLegendre& rule(int n) {
        static const GaussLegendre g8(8), g16(16), g24(24), g32(32), g48(48), g64(64);
        if (n <= 8) return g8;
        if (n <= 16) return g16;
        if (n <= 24) return g24;
        if (n <= 32) return g32;
        if (n <= 48) return g48;
        return g64;
    }
};

/// Fixed-order Gauss-Legendre on [a,b].
template <class F>
double gauss(const F& f, double a, double b, int order = 32) {
    const auto& g = GaussLegendre::rule(order);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double s = 0.0;
    for (std::size_t i = 0; i < g.x.size(); ++i) s += g.w[i] * f(mid + half * g.x[i]);
    return s * half;
}

/// Composite Gauss-Legendre with panel doubling until two successive levels
/// agree to rel_tol (Richardson-style stopping, value from the finer level).
template <class F>
double integrate(const F& f, double a, double b, double rel_tol = 1e-10,
                 int max_level = 10, int order = 16) {
    if (a == b) return 0.0;
    double prev = gauss(f, a, b, order);
    int panels = 2;
    for (int lev = 0; lev < max_level; ++lev) {
        double s = 0.0;
        double dx = (b - a) / panels;
        for (int k = 0; k < panels; ++k) s += gauss(f, a + k * dx, a + (k + 1) * dx, order);
        double scale = std::max({std::abs(s), std::abs(prev), 1e-300});
        if (std::abs(s - prev) <= rel_tol * scale) return s;
        prev = s;
        panels *= 2;
    }
    return prev;
}

// ---------------------------------------------------------------------------
// Endpoint-singular integrals. All turning-point integrands here behave like
// (Z-a)^{+-1/2} near an endpoint; the substitutions below remove that exactly
// so plain Gauss-Legendre converges fast.
// ---------------------------------------------------------------------------

/// @brief integral over (a,b) of F where F ~ C/sqrt(Z-a) near a and is smooth
/// at b. Substitution Z = a + (b-a) t^2 gives integrand 2(b-a) t F(a+(b-a)t^2).
template <class F>
double integrate_invsqrt_left(const F& f, double a, double b, double rel_tol = 1e-10) {
    const double L = b - a;
    auto g = [&](double t) { return 2.0 * L * t * f(a + L * t * t); };
    return integrate(g, 0.0, 1.0, rel_tol);
}

template <class F>
double integrate_invsqrt_right(const F& f, double a, double b, double rel_tol = 1e-10) {
    const double L = b - a;
    auto g = [&](double t) { return 2.0 * L * t * f(b - L * t * t); };
    return integrate(g, 0.0, 1.0, rel_tol);
}

/// Both endpoints 1/sqrt-singular: Z = mid + r sin(theta).
template <class F>
double integrate_invsqrt_both(const F& f, double a, double b, double rel_tol = 1e-10) {
    const double mid = 0.5 * (a + b), r = 0.5 * (b - a);
    auto g = [&](double th) { return r * std::cos(th) * f(mid + r * std::sin(th)); };
    return integrate(g, -pi / 2, pi / 2, rel_tol);
}

/// Abel-type kernel: integral over (lo, E) of q(u) du where q may carry
/// 1/sqrt factors at either end. The caller supplies the *regularized*
/// integrand in the variable u together with the substitution u = lo +
/// (E-lo) sin^2(theta); we hand it u and the Jacobian pieces:
///   du = 2 (E-lo) sin cos dtheta,  sqrt(u-lo) = sqrt(E-lo) sin,
///   sqrt(E-u) = sqrt(E-lo) cos.
/// q_reg(u, sqrt_u_minus_lo, sqrt_E_minus_u) must return q(u) *
/// sqrt(u-lo) * sqrt(E-u), i.e. the smooth part.
template <class F>
double integrate_abel_kernel(const F& q_reg, double lo, double E, double rel_tol = 1e-10) {
    const double L = E - lo;
    if (L <= 0.0) return 0.0;
    // du/(sqrt(u-lo) sqrt(E-u)) = 2 dtheta exactly under the substitution
    auto g = [&](double th) {
        double s = std::sin(th), c = std::cos(th);
        double u = lo + L * s * s;
        double su = std::sqrt(L) * s;  // sqrt(u - lo)
        double se = std::sqrt(L) * c;  // sqrt(E - u)
        return 2.0 * q_reg(u, su, se);
    };
    return integrate(g, 0.0, pi / 2, rel_tol);
}

}  // namespace specwell
