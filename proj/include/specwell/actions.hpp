#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "specwell/common.hpp"
#include "specwell/deriv.hpp"
#include "specwell/model.hpp"
#include "specwell/ode.hpp"
#include "specwell/profile.hpp"
#include "specwell/quadrature.hpp"
#include "specwell/rootfind.hpp"

namespace specwell {

struct PhaseSpacePoint {
    double z;
    double zeta;
};

inline double hamiltonian(const ProfileModel& p, const PhaseSpacePoint& s) {
    return p.value(s.z) * (1.0 + s.zeta * s.zeta);
}

// ---------------------------------------------------------------------------
// Turning points
// ---------------------------------------------------------------------------

struct TurningPair {
    double f_minus, f_plus;
};

namespace detail {

inline double turning_on_flank(const ProfileModel& p, double E, double z_a, double z_b,
                               double res_tol_rel) {
    double fa = p.value(z_a) - E, fb = p.value(z_b) - E;
    if (fa == 0.0) return z_a;
    if (fb == 0.0) return z_b;
    if (fa * fb > 0.0) throw input_error("turning_points: E outside the well's band");
    double z = brent([&](double Z) { return p.value(Z) - E; }, z_a, z_b, 1e-15);
    double res = std::abs(p.value(z) - E);
    double mu_I = p.floor_value();
    bool jump = !p.jump_points().empty();
    if (res > res_tol_rel * mu_I && !jump)
        throw numeric_error("turning_points: residual above tolerance");
    if (!jump && std::abs(p.deriv(z)) < 1e-10 * mu_I / std::abs(p.z_min()))
        throw numeric_error("turning_points: non-simple turning point");
    return z;
}

}  // namespace detail

/// [OPERATION] turning_points for a separated well: mu(f-) = mu(f+) = E.
inline TurningPair turning_points_full(const ProfileModel& p, double E, const WellInterval& w,
                                       const ProfileTolerances& tol = {}) {
    TurningPair t;
    t.f_minus = detail::turning_on_flank(p, E, w.z_left_top, w.z_left_bot, tol.turning_residual_rel);
    t.f_plus = detail::turning_on_flank(p, E, w.z_right_bot, w.z_right_top, tol.turning_residual_rel);
    return t;
}

/// [OPERATION] turning_points for the boundary half well.
inline double turning_point_half(const ProfileModel& p, double E, const HalfWellInterval& hw,
                                 const ProfileTolerances& tol = {}) {
    return detail::turning_on_flank(p, E, hw.z_top, hw.z_bot, tol.turning_residual_rel);
}

// ---------------------------------------------------------------------------
// Action and period quadratures. Endpoint square roots are removed exactly:
// sin substitution for two turning points, t^2 substitution for one.
// ---------------------------------------------------------------------------

namespace detail {

// ratio (E - mu(Z)) / ((Z-a)(b-Z)) extended smoothly across the ends
inline double edge_ratio2(const ProfileModel& p, double E, double Z, double a, double b) {
    double den = (Z - a) * (b - Z);
    double num = E - p.value(Z);
    if (den <= 0.0) {  // exactly at an endpoint: L'Hopital via mu'
        bool left = std::abs(Z - a) < std::abs(b - Z);
        double g = std::abs(p.deriv(left ? a : b));
        return g / (b - a);
    }
    return std::max(num / den, 0.0);
}

template <class F>
double well_integral(const ProfileModel& p, double E, double fm, double fp, const F& weight,
                     double rel_tol) {
    // integral over (fm, fp) of weight(Z) / sqrt(E - mu(Z)) dZ;
    // dZ / sqrt(E - mu) = dtheta / sqrt(edge_ratio2) under Z = mid + r sin(theta)
    const double mid = 0.5 * (fm + fp), r = 0.5 * (fp - fm);
    auto g = [&](double th) {
        double Z = mid + r * std::sin(th);
        double w2 = edge_ratio2(p, E, Z, fm, fp);
        return weight(Z) / std::sqrt(std::max(w2, 1e-300));
    };
    return integrate(g, -pi / 2, pi / 2, rel_tol);
}

template <class F>
double half_integral(const ProfileModel& p, double E, double f, const F& weight,
                     double rel_tol) {
    // integral over (f, 0) of weight(Z) / sqrt(E - mu(Z)) dZ; sqrt zero at f only
    const double L = -f;
    auto g = [&](double t) {
        double Z = f + L * t * t;
        double rq = (E - p.value(Z)) / std::max(Z - f, 1e-300);  // -> |mu'(f)| at t=0
        if (Z <= f) rq = std::abs(p.deriv(f));
        return 2.0 * std::sqrt(L) * weight(Z) / std::sqrt(std::max(rq, 1e-300));
    };
    return integrate(g, 0.0, 1.0, rel_tol);
}

}  // namespace detail

/// [OPERATION] s0_full: the loop action = phase-space area of the well,
/// S0 = 2 * integral of sqrt((E-mu)/mu) over the well.
inline double s0_full(const ProfileModel& p, double E, const TurningPair& t,
                      double rel_tol = 1e-10) {
    const double mid = 0.5 * (t.f_minus + t.f_plus), r = 0.5 * (t.f_plus - t.f_minus);
    auto g = [&](double th) {
        double c = std::cos(th);
        double Z = mid + r * std::sin(th);
        double w2 = detail::edge_ratio2(p, E, Z, t.f_minus, t.f_plus);
        // sqrt(E - mu) dZ = r^2 cos^2(theta) sqrt(w2) dtheta
        return r * r * c * c * std::sqrt(w2 / p.value(Z));
    };
    return 2.0 * integrate(g, -pi / 2, pi / 2, rel_tol);
}

/// [OPERATION] s0_half: S~0 = 4 * integral of sqrt((E-mu)/mu) from f(E) to 0.
inline double s0_half(const ProfileModel& p, double E, double f, double rel_tol = 1e-10) {
    const double L = -f;
    auto g = [&](double t) {
        double Z = f + L * t * t;
        double rq = (Z > f) ? (E - p.value(Z)) / (Z - f) : std::abs(p.deriv(f));
        return 2.0 * std::pow(L, 1.5) * t * t * std::sqrt(std::max(rq, 0.0) / p.value(Z));
    };
    return 4.0 * integrate(g, 0.0, 1.0, rel_tol);
}

/// [OPERATION] period for a separated well: T = integral dZ / sqrt(mu (E-mu)).
inline double period_full(const ProfileModel& p, double E, const TurningPair& t,
                          double rel_tol = 1e-10) {
    return detail::well_integral(
        p, E, t.f_minus, t.f_plus, [&](double Z) { return 1.0 / std::sqrt(p.value(Z)); },
        rel_tol);
}

/// [OPERATION] period for the half well (half of dS~0/dE; the loop time of
/// the reflected trajectory).
inline double period_half(const ProfileModel& p, double E, double f, double rel_tol = 1e-10) {
    return detail::half_integral(
        p, E, f, [&](double Z) { return 1.0 / std::sqrt(p.value(Z)); }, rel_tol);
}

// J and K correction integrals, full-well form (eq. between two turning
// points) and half-well form (turning point to the surface).

inline double j_full(const ProfileModel& p, double E, const TurningPair& t,
                     double rel_tol = 1e-9) {
    return detail::well_integral(
        p, E, t.f_minus, t.f_plus,
        [&](double Z) {
            double mu = p.value(Z), d1 = p.deriv(Z), d2 = p.deriv2(Z);
            return (E * d2 - 2.0 * (E - mu) / mu * d1 * d1) / std::sqrt(mu);
        },
        rel_tol);
}

inline double k_full(const ProfileModel& p, double E, const TurningPair& t,
                     double rel_tol = 1e-9) {
    return detail::well_integral(
        p, E, t.f_minus, t.f_plus,
        [&](double Z) { return p.deriv2(Z) / std::sqrt(p.value(Z)); }, rel_tol);
}

inline double j_half(const ProfileModel& p, double E, double f, double rel_tol = 1e-9) {
    return detail::half_integral(
        p, E, f,
        [&](double Z) {
            double mu = p.value(Z), d1 = p.deriv(Z), d2 = p.deriv2(Z);
            return (E * d2 - 2.0 * (E - mu) / mu * d1 * d1) / std::sqrt(mu);
        },
        rel_tol);
}

inline double k_half(const ProfileModel& p, double E, double f, double rel_tol = 1e-9) {
    return detail::half_integral(
        p, E, f, [&](double Z) { return p.deriv2(Z) / std::sqrt(p.value(Z)); }, rel_tol);
}

/// [OPERATION] s2_full: S2 = -(1/12) dJ/dE - (1/4) K.
inline double s2_full(const ProfileModel& p, double E, const WellInterval& w, double band_lo,
                      double band_hi, const ProfileTolerances& tol = {}) {
    double span = band_hi - band_lo;
    double de = std::min(1e-3 * span, 0.2 * std::min(E - band_lo, band_hi - E));
    if (de <= 0) throw numeric_error("s2_full: E too close to the band edge");
    auto Jat = [&](double e) {
        auto t = turning_points_full(p, e, w, tol);
        return j_full(p, e, t);
    };
    double dJ = diff1(Jat, E, de);
    auto t = turning_points_full(p, E, w, tol);
    return -dJ / 12.0 - k_full(p, E, t) / 4.0;
}

/// [OPERATION] s2_half: the five-term boundary-corrected S~2.
inline double s2_half(const ProfileModel& p, double E, const HalfWellInterval& hw,
                      double band_lo, double band_hi, const ProfileTolerances& tol = {}) {
    const double mu0 = p.value(p.z_max());
    const double dmu0 = p.deriv(p.z_max());
    const bool flat = std::abs(dmu0) < 1e-12 * p.floor_value();
    if (!flat && E - mu0 <= 1e-10 * p.floor_value())
        throw numeric_error("s2_half: boundary term blow-up as E approaches mu(0)");
    double span = band_hi - band_lo;
    double de = std::min(1e-3 * span, 0.2 * std::min(E - band_lo, band_hi - E));
    if (de <= 0) throw numeric_error("s2_half: E too close to the band edge");
    auto Jat = [&](double e) { return j_half(p, e, turning_point_half(p, e, hw, tol)); };
    double dJ = diff1(Jat, E, de);
    double f = turning_point_half(p, E, hw, tol);
    double K = k_half(p, E, f);
    double bt1 = 0.0, bt2 = 0.0, F1 = 0.0;
    if (!flat) {
        double em = E - mu0;
        bt1 = (3.0 * E + 2.0 * mu0) * dmu0 / (48.0 * std::sqrt(mu0) * std::pow(em, 1.5));
        bt2 = dmu0 / (24.0 * std::sqrt(em) * std::sqrt(mu0));
        F1 = (-E + 2.0 * mu0) * dmu0 / (4.0 * std::pow(em, 1.5) * std::sqrt(mu0));
    }
    return 4.0 * (bt1 + bt2 - dJ / 24.0 - K / 8.0 - F1);
}

// ---------------------------------------------------------------------------
// Hamiltonian trajectory
// ---------------------------------------------------------------------------

struct TrajectoryResult {
    double period;
    double energy_drift;  // max |p0 - E| along the way
};

/// [OPERATION] period_via_trajectory: integrate the flow of
/// p0 = mu(Z)(1 + zeta^2) with perfect reflection at Z = 0 until first return.
inline TrajectoryResult period_via_trajectory(const ProfileModel& p, double E,
                                              PhaseSpacePoint start, double rtol = 1e-11) {
    if (std::abs(hamiltonian(p, start) - E) > 1e-8 * std::max(E, 1.0))
        throw input_error("period_via_trajectory: start point not on the energy shell");

    using S = Rk45<2>::State;
    Rk45<2> integ(
        [&](double, const S& y, S& dy) {
            double mu = p.value(y[0]), d1 = p.deriv(y[0]);
            dy[0] = 2.0 * mu * y[1];
            dy[1] = -d1 * (1.0 + y[1] * y[1]);
        },
        rtol, 1e-13);

    const bool half_mode = std::abs(start.z) < 1e-12;
    S y{start.z, start.zeta};
    if (half_mode) {
        if (y[1] <= 0) throw input_error("period_via_trajectory: half-well start needs zeta > 0");
        y[1] = -y[1];  // immediate perfect reflection, then the downward leg
    }
    double t = 0.0, drift = 0.0;
    int zeta_flips = 0;
    double dt = 1e-4;
    auto energy = [&](const S& s) { return p.value(s[0]) * (1.0 + s[1] * s[1]); };
    int steps = 0;
    while (true) {
        if (++steps > 5000000) throw numeric_error("trajectory: failed to close");
        S ynew, err;
        integ.step(t, y, dt, ynew, err);
        double sc = 0.0;
        for (int i = 0; i < 2; ++i) {
            double tolr = 1e-13 + rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            sc = std::max(sc, std::abs(err[i]) / tolr);
        }
        if (sc > 1.0) {
            dt *= std::clamp(0.9 * std::pow(sc, -0.2), 0.2, 1.0);
            continue;
        }
        if (half_mode && ynew[0] > 0.0) {
            // surface reached moving up: the reflected loop closes here
            double a = 0.0, b = dt;
            for (int it = 0; it < 80 && (b - a) > 1e-16 * std::max(t, 1.0); ++it) {
                double m = 0.5 * (a + b);
                S tmp, e2;
                integ.step(t, y, m, tmp, e2);
                (tmp[0] > 0.0 ? b : a) = m;
            }
            return {t + 0.5 * (a + b), drift};
        }
        if (!half_mode && y[1] != 0.0 && (y[1] > 0) != (ynew[1] > 0)) {
            ++zeta_flips;
            if (zeta_flips == 2) {
                // second turning: back at the starting turning point
                double a = 0.0, b = dt;
                bool from_pos = y[1] > 0;
                for (int it = 0; it < 80 && (b - a) > 1e-16 * std::max(t, 1.0); ++it) {
                    double m = 0.5 * (a + b);
                    S tmp, e2;
                    integ.step(t, y, m, tmp, e2);
                    ((tmp[1] > 0) == from_pos ? a : b) = m;
                }
                return {t + 0.5 * (a + b), drift};
            }
        }
        t += dt;
        y = ynew;
        drift = std::max(drift, std::abs(energy(y) - E));
        dt *= std::clamp(0.9 * std::pow(std::max(sc, 1e-8), -0.2), 0.5, 5.0);
    }
}

// ---------------------------------------------------------------------------
// Action tables
// ---------------------------------------------------------------------------

/// Sampled S0, S2 and period on an energy grid for one well (or the half well).
struct ActionTable {
    int k = 0;        // band index
    int j = 0;        // well id within the band; N_k+1 entries, half well last
    bool half = false;
    double band_lo = 0.0, band_hi = 0.0;  // the covered closed sub-band
    std::vector<double> E, S0, S2, T;     // S0/S2 are the ~ versions for half wells
    double mu0 = 0.0, dmu0 = 0.0;         // surface data (half wells)

    bool has_s2() const { return S2.size() == E.size(); }
};

struct ActionTableOpts {
    int n_points = 96;
    double edge_margin_rel = 2e-3;  // fraction of the band kept clear at edges
    bool with_s2 = true;
    double quad_rel_tol = 1e-10;
};

inline ActionTable build_action_table_full(const ProfileModel& p, const WellInterval& w,
                                           int k, int j, double band_lo, double band_hi,
                                           ActionTableOpts opts = {},
                                           const ProfileTolerances& tol = {}) {
    ActionTable at;
    at.k = k;
    at.j = j;
    at.half = false;
    double m = opts.edge_margin_rel * (band_hi - band_lo);
    at.band_lo = band_lo + m;
    at.band_hi = band_hi - m;
    at.E = edge_refined_grid(at.band_lo, at.band_hi, opts.n_points);
    at.S0.resize(at.E.size());
    at.T.resize(at.E.size());
    if (opts.with_s2) at.S2.resize(at.E.size());
    parallel_for(at.E.size(), [&](std::size_t i) {
        double E = at.E[i];
        auto tp = turning_points_full(p, E, w, tol);
        at.S0[i] = s0_full(p, E, tp, opts.quad_rel_tol);
        at.T[i] = period_full(p, E, tp, opts.quad_rel_tol);
        if (opts.with_s2) at.S2[i] = s2_full(p, E, w, band_lo, band_hi, tol);
    });
    return at;
}

inline ActionTable build_action_table_half(const ProfileModel& p, const HalfWellInterval& hw,
                                           int k, int j, double band_lo, double band_hi,
                                           ActionTableOpts opts = {},
                                           const ProfileTolerances& tol = {}) {
    ActionTable at;
    at.k = k;
    at.j = j;
    at.half = true;
    at.mu0 = p.value(p.z_max());
    at.dmu0 = p.deriv(p.z_max());
    double m = opts.edge_margin_rel * (band_hi - band_lo);
    at.band_lo = band_lo + m;
    at.band_hi = band_hi - m;
    at.E = edge_refined_grid(at.band_lo, at.band_hi, opts.n_points);
    at.S0.resize(at.E.size());
    at.T.resize(at.E.size());
    if (opts.with_s2) at.S2.resize(at.E.size());
    parallel_for(at.E.size(), [&](std::size_t i) {
        double E = at.E[i];
        double f = turning_point_half(p, E, hw, tol);
        at.S0[i] = s0_half(p, E, f, opts.quad_rel_tol);
        at.T[i] = period_half(p, E, f, opts.quad_rel_tol);
        if (opts.with_s2) at.S2[i] = s2_half(p, E, hw, band_lo, band_hi, tol);
    });
    return at;
}

}  // namespace specwell
