#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "support/oracles.hpp"

#include "specwell/actions.hpp"
#include "specwell/deriv.hpp"
#include "specwell/presets.hpp"
#include "specwell/profile.hpp"

using namespace specwell;

namespace {

// quadratic well mu = 1 + (Z+2)^2 on [-4, 0]
struct Quad {
    std::unique_ptr<ProfileModel> m = presets::quadratic_well();
    WellInterval well{-3.9, -0.1, -2.0, -2.0};  // flank brackets across (1, ~4.5)
};

// S0 oracle for the quadratic well: Z+2 = r sin(u), r = sqrt(E-1)
double s0_quad_oracle(double E) {
    double r = std::sqrt(E - 1.0);
    auto f = [&](double u) {
        double s = std::sin(u), c = std::cos(u);
        return r * r * c * c / std::sqrt(1.0 + r * r * s * s);
    };
    return 2.0 * oracle::adaptive_simpson(f, -M_PI / 2, M_PI / 2, 1e-13);
}

double k_quad_oracle(double E) {
    double r = std::sqrt(E - 1.0);
    auto f = [&](double u) {
        double s = std::sin(u);
        return 2.0 / std::sqrt(1.0 + r * r * s * s);
    };
    return oracle::adaptive_simpson(f, -M_PI / 2, M_PI / 2, 1e-13);
}

double j_quad_oracle(double E) {
    double r = std::sqrt(E - 1.0);
    auto f = [&](double u) {
        double s = std::sin(u), c = std::cos(u);
        double mu = 1.0 + r * r * s * s;
        double dmu2 = 4.0 * r * r * s * s;        // (mu')^2 with mu' = 2(Z+2)
        double emu = r * r * c * c;               // E - mu
        return (2.0 * E - 2.0 * emu / mu * dmu2 / (r * c) * (r * c) / 1.0) /
               std::sqrt(mu);
    };
    // note: dZ/sqrt(E-mu) = du exactly, so the integrand is the bracket/sqrt(mu)
    auto g = [&](double u) {
        double s = std::sin(u), c = std::cos(u);
        double mu = 1.0 + r * r * s * s;
        double emu = r * r * c * c;
        double dmu_sq = 4.0 * r * r * s * s;
        return (2.0 * E - 2.0 * emu / mu * dmu_sq) / std::sqrt(mu);
    };
    (void)f;
    return oracle::adaptive_simpson(g, -M_PI / 2, M_PI / 2, 1e-13);
}

}  // namespace

TEST_CASE("turning points: quadratic well at E = 2") {
    Quad q;
    auto t = turning_points_full(*q.m, 2.0, q.well);
    CHECK(t.f_minus == doctest::Approx(-3.0).epsilon(1e-12));
    CHECK(t.f_plus == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("turning points collapse to the vertex at the band bottom") {
    Quad q;
    auto t = turning_points_full(*q.m, 1.0 + 1e-8, q.well);
    CHECK(t.f_minus == doctest::Approx(-2.0).epsilon(1e-4));
    CHECK(t.f_plus == doctest::Approx(-2.0).epsilon(1e-4));
}

TEST_CASE("turning point of the monotone preset") {
    auto m = presets::monotone();
    HalfWellInterval hw{-0.999999, -1e-9};
    double f = turning_point_half(*m, 1.5, hw);
    CHECK(f == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK_THROWS_AS(turning_point_half(*m, 5.0, hw), input_error);
}

TEST_CASE("s0_full vanishes at the well bottom and matches the oracle") {
    Quad q;
    auto t_lo = turning_points_full(*q.m, 1.0 + 1e-9, q.well);
    CHECK(s0_full(*q.m, 1.0 + 1e-9, t_lo) < 1e-8);
    for (double E : {1.25, 2.0, 3.1}) {
        auto t = turning_points_full(*q.m, E, q.well);
        CHECK(s0_full(*q.m, E, t) == doctest::Approx(s0_quad_oracle(E)).epsilon(1e-8));
    }
}

TEST_CASE("s0_full equals the phase-space area (Monte Carlo)") {
    Quad q;
    double E = 2.0;
    auto t = turning_points_full(*q.m, E, q.well);
    double s0 = s0_full(*q.m, E, t);
    oracle::Rng rng(20240817u);
    double zeta_max = std::sqrt(E / 1.0 - 1.0);
    double box = (t.f_plus - t.f_minus) * 2.0 * zeta_max;
    long hits = 0;
    const long n = 4000000;
    for (long i = 0; i < n; ++i) {
        double Z = t.f_minus + (t.f_plus - t.f_minus) * rng.uniform();
        double zeta = -zeta_max + 2.0 * zeta_max * rng.uniform();
        if (q.m->value(Z) * (1.0 + zeta * zeta) <= E) ++hits;
    }
    double mc = box * static_cast<double>(hits) / n;
    CHECK(std::abs(mc - s0) < 1e-3 * std::max(1.0, s0) * 2.5);
}

TEST_CASE("J and K match brute-force substituted quadrature") {
    Quad q;
    for (double E : {1.25, 2.4}) {
        auto t = turning_points_full(*q.m, E, q.well);
        CHECK(j_full(*q.m, E, t) == doctest::Approx(j_quad_oracle(E)).epsilon(1e-6));
        CHECK(k_full(*q.m, E, t) == doctest::Approx(k_quad_oracle(E)).epsilon(1e-6));
    }
}

TEST_CASE("constant curvature factors out of K") {
    Quad q;  // mu'' = 2 everywhere
    double E = 1.8;
    auto t = turning_points_full(*q.m, E, q.well);
    CHECK(k_full(*q.m, E, t) ==
          doctest::Approx(2.0 * period_full(*q.m, E, t)).epsilon(1e-10));
}

TEST_CASE("period approaches the small-oscillation limit at the bottom") {
    Quad q;  // E1 = 1, mu''(Z1) = 2: T -> pi sqrt(2/(1*2)) = pi
    auto t = turning_points_full(*q.m, 1.0 + 1e-5, q.well);
    CHECK(period_full(*q.m, 1.0 + 1e-5, t) == doctest::Approx(pi).epsilon(1e-4));
}

TEST_CASE("s0_half: closed forms") {
    auto lin = presets::monotone();
    HalfWellInterval hw{-0.999999, -1e-9};
    // E -> E0 gives zero action
    CHECK(s0_half(*lin, 1.0 + 1e-9, turning_point_half(*lin, 1.0 + 1e-9, hw)) < 1e-7);
    // linear profile at E = 2: the closed form is 2 pi - 4
    HalfWellInterval hw_full{-1.0, -1e-9};
    double f = turning_point_half(*lin, 2.0 - 1e-12, hw_full);
    CHECK(s0_half(*lin, 2.0, f) == doctest::Approx(2.0 * pi - 4.0).epsilon(1e-6));
    // layer: constant integrand, S~0 = 4 sqrt(E - m1) H
    auto layer = presets::layer(1.0, 4.0, 1.0);
    HalfWellInterval lhw{-1.0 - 1e-6, -1e-9};
    for (double E : {1.5, 2.5, 3.5}) {
        double fl = turning_point_half(*layer, E, lhw);
        CHECK(fl == doctest::Approx(-1.0).epsilon(1e-9));
        CHECK(s0_half(*layer, E, fl) ==
              doctest::Approx(4.0 * std::sqrt(E - 1.0)).epsilon(1e-7));
    }
}

TEST_CASE("s2_half: flat surface drops the boundary terms") {
    auto m = presets::flat_start();  // mu'(0) = 0
    auto cs = critical_structure(*m);
    auto d = decompose(*m, 1, cs);
    double E = 1.5;
    double v = s2_half(*m, E, d.half, 1.0, 2.0);
    // must equal -(1/6) dJ~/dE - (1/2) K~
    double de = 1e-4;
    auto Jat = [&](double e) { return j_half(*m, e, turning_point_half(*m, e, d.half)); };
    double dJ = diff1(Jat, E, de);
    double K = k_half(*m, E, turning_point_half(*m, E, d.half));
    CHECK(v == doctest::Approx(-dJ / 6.0 - K / 2.0).epsilon(1e-6));
}

TEST_CASE("s2_half matches the delta-counterterm limit form") {
    // the paper's regularized form with explicit counterterm, evaluated at
    // small delta and Richardson-extrapolated in sqrt(delta)
    auto m = presets::monotone();
    auto cs = critical_structure(*m);
    auto d = decompose(*m, 1, cs);
    double E = 1.6;
    double f = turning_point_half(*m, E, d.half);
    double a1 = -m->deriv(f);
    double a2 = 0.5 * m->deriv2(f);
    auto reg_integral = [&](double delta) {
        // substitute Z = f + s^2 to tame the (E-mu)^{-3/2} edge
        auto g = [&](double s) {
            double Z = f + s * s;
            double mu = m->value(Z), d1 = m->deriv(Z), d2 = m->deriv2(Z);
            double em = E - mu;
            double v = d1 * d1 / (24.0 * std::pow(mu, 1.5) * std::sqrt(em)) -
                       (7.0 * E - 8.0 * mu) * d2 / (48.0 * std::sqrt(mu) * std::pow(em, 1.5));
            return 2.0 * s * v;
        };
        return oracle::adaptive_simpson(g, std::sqrt(delta), std::sqrt(-f), 1e-12);
    };
    auto value_at = [&](double delta) {
        double mu0 = m->value(0.0), dmu0 = m->deriv(0.0);
        double em = E - mu0;
        double bt1 = (3.0 * E + 2.0 * mu0) * dmu0 / (48.0 * std::sqrt(mu0) * std::pow(em, 1.5));
        double bt2 = dmu0 / (24.0 * std::sqrt(em) * std::sqrt(mu0));
        double F1 = (-E + 2.0 * mu0) * dmu0 / (4.0 * std::pow(em, 1.5) * std::sqrt(mu0));
        double cterm = std::sqrt(E) * a2 / (24.0 * std::pow(a1, 1.5) * std::sqrt(delta));
        return 4.0 * (bt1 + bt2 + reg_integral(delta) - cterm - F1);
    };
    double d1v = value_at(1e-4), d2v = value_at(1e-5);
    double s1 = std::sqrt(1e-4), s2 = std::sqrt(1e-5);
    double extrap = (d2v * s1 - d1v * s2) / (s1 - s2);
    double lib = s2_half(*m, E, d.half, 1.0, 2.0);
    CHECK(lib == doctest::Approx(extrap).epsilon(2e-4));
}

TEST_CASE("F1 term sign for a decreasing surface") {
    // mu'(0) < 0 and E < 2 mu(0): the -F1 contribution to S~2/4 is positive
    auto m = presets::monotone();  // mu(0) = 1, mu'(0) = -1
    double E = 1.5;                // E < 2 mu(0) = 2
    double mu0 = 1.0, dmu0 = -1.0;
    double F1 = (-E + 2.0 * mu0) * dmu0 / (4.0 * std::pow(E - mu0, 1.5) * std::sqrt(mu0));
    CHECK(F1 < 0.0);
    CHECK(-F1 > 0.0);
}

TEST_CASE("s2_half is finite across the interior of the band") {
    auto m = presets::monotone();
    auto cs = critical_structure(*m);
    auto d = decompose(*m, 1, cs);
    for (double E : {1.1, 1.3, 1.5, 1.7, 1.9}) {
        double v = s2_half(*m, E, d.half, 1.0, 2.0);
        CHECK(std::isfinite(v));
    }
}

TEST_CASE("periods: positivity and dS0/dE consistency") {
    Quad q;
    for (double E : {1.3, 2.2, 3.0}) {
        auto t = turning_points_full(*q.m, E, q.well);
        double T = period_full(*q.m, E, t);
        CHECK(T > 0.0);
        double de = 1e-5;
        auto t1 = turning_points_full(*q.m, E - de, q.well);
        auto t2 = turning_points_full(*q.m, E + de, q.well);
        double ds0 = (s0_full(*q.m, E + de, t2) - s0_full(*q.m, E - de, t1)) / (2 * de);
        CHECK(ds0 == doctest::Approx(T).epsilon(1e-5));
    }
    auto lin = presets::monotone();
    HalfWellInterval hw{-0.999999, -1e-9};
    for (double E : {1.3, 1.8}) {
        double f = turning_point_half(*lin, E, hw);
        double Tl = period_half(*lin, E, f);
        double de = 1e-5;
        double ds0 = (s0_half(*lin, E + de, turning_point_half(*lin, E + de, hw)) -
                      s0_half(*lin, E - de, turning_point_half(*lin, E - de, hw))) /
                     (2 * de);
        // dS~0/dE = 2 * loop period
        CHECK(ds0 == doctest::Approx(2.0 * Tl).epsilon(1e-5));
    }
}

TEST_CASE("layer half-well period closed form") {
    auto layer = presets::layer(1.0, 4.0, 1.0);
    HalfWellInterval hw{-1.0 - 1e-6, -1e-9};
    double E = 2.5;
    double f = turning_point_half(*layer, E, hw);
    CHECK(period_half(*layer, E, f) == doctest::Approx(1.0 / std::sqrt(E - 1.0)).epsilon(1e-7));
}

TEST_CASE("trajectory period agrees with the quadrature period") {
    Quad q;
    double E = 2.0;
    auto t = turning_points_full(*q.m, E, q.well);
    double T = period_full(*q.m, E, t);
    auto tr = period_via_trajectory(*q.m, E, {t.f_minus, 0.0});
    CHECK(tr.period == doctest::Approx(T).epsilon(1e-6));
    CHECK(tr.energy_drift < 1e-9);

    auto lin = presets::monotone();
    double Eh = 1.6;
    double zeta0 = std::sqrt(Eh / 1.0 - 1.0);
    auto trh = period_via_trajectory(*lin, Eh, {0.0, zeta0});
    HalfWellInterval hw{-0.999999, -1e-9};
    double Th = period_half(*lin, Eh, turning_point_half(*lin, Eh, hw));
    CHECK(trh.period == doctest::Approx(Th).epsilon(1e-6));
    CHECK(trh.energy_drift < 1e-9);
}

TEST_CASE("trajectory rejects off-shell starts") {
    Quad q;
    CHECK_THROWS_AS(period_via_trajectory(*q.m, 2.0, {-3.0, 0.5}), input_error);
}

TEST_CASE("quadratures are stable under tolerance refinement") {
    Quad q;
    double E = 2.3;
    auto t = turning_points_full(*q.m, E, q.well);
    double a = s0_full(*q.m, E, t, 1e-8);
    double b = s0_full(*q.m, E, t, 1e-12);
    CHECK(std::abs(a - b) < 1e-7 * std::abs(b));
}

TEST_CASE("mirror symmetry of S0, S2, T") {
    // an asymmetric well and its mirror image
    auto base = [](double Z) { return 1.0 + (Z + 2.0) * (Z + 2.0) * (1.0 + 0.3 * (Z + 2.0)); };
    auto dbase = [](double Z) {
        double u = Z + 2.0;
        return 2.0 * u + 0.9 * u * u;
    };
    auto d2base = [](double Z) { return 2.0 + 1.8 * (Z + 2.0); };
    const double zc = -4.0;  // mirror Z -> zc - Z about -2
    AnalyticProfile fwd(base, dbase, d2base, -3.2, -0.8);
    AnalyticProfile mir([&](double Z) { return base(zc - Z); },
                        [&](double Z) { return -dbase(zc - Z); },
                        [&](double Z) { return d2base(zc - Z); }, -3.2, -0.8);
    WellInterval wf{-3.1, -0.9, -2.0, -2.0};
    for (double E : {1.2, 1.5}) {
        auto tf = turning_points_full(fwd, E, wf);
        auto tm = turning_points_full(mir, E, wf);
        CHECK(s0_full(mir, E, tm) == doctest::Approx(s0_full(fwd, E, tf)).epsilon(1e-9));
        CHECK(period_full(mir, E, tm) == doctest::Approx(period_full(fwd, E, tf)).epsilon(1e-9));
        CHECK(j_full(mir, E, tm) == doctest::Approx(j_full(fwd, E, tf)).epsilon(1e-8));
        CHECK(k_full(mir, E, tm) == doctest::Approx(k_full(fwd, E, tf)).epsilon(1e-8));
    }
}

TEST_CASE("period decomposition over a known sub-well region") {
    // T(E) = T_- + T_known + T_+ on the two-well preset's merged band
    auto m = presets::two_well();
    auto cs = critical_structure(*m);
    REQUIRE(cs.points.size() == 4);
    auto d4 = decompose(*m, 4, cs);
    REQUIRE(d4.wells.size() == 1);
    double e3 = cs.band_edges()[3];  // the joining barrier value
    // known region: the merged well's turning interval at the band bottom
    double zm = d4.wells[0].z_left_bot, zp = d4.wells[0].z_right_bot;
    double E = 0.5 * (d4.e_lo + d4.e_hi);
    auto t = turning_points_full(*m, E, d4.wells[0]);
    double T_full = period_full(*m, E, t);
    auto integrand = [&](double Z) {
        double mu = m->value(Z);
        return 1.0 / std::sqrt(mu * std::max(E - mu, 1e-300));
    };
    double T_minus = integrate_invsqrt_left(integrand, t.f_minus, zm, 1e-11);
    double T_mid = integrate([&](double th) {
        double mid = 0.5 * (zm + zp), r = 0.5 * (zp - zm);
        return r * std::cos(th) * integrand(mid + r * std::sin(th));
    }, -pi / 2, pi / 2, 1e-11, 12);
    double T_plus = integrate_invsqrt_right(integrand, zp, t.f_plus, 1e-11);
    CHECK(T_minus + T_mid + T_plus == doctest::Approx(T_full).epsilon(1e-8));
    (void)e3;
}
