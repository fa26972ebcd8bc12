#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "support/oracles.hpp"

#include "specwell/transforms.hpp"

using namespace specwell;

namespace {
constexpr double LO = 1.3, HI = 2.6;
}

TEST_CASE("abel_T closed forms") {
    auto one = BandFunction::sample(LO, HI, [](double) { return 1.0; });
    auto lin = BandFunction::sample(LO, HI, [](double u) { return u - LO; });
    for (double E : {1.6, 2.0, 2.55}) {
        CHECK(abel_T(one, E) == doctest::Approx(2.0 * std::sqrt(E - LO)).epsilon(1e-10));
        CHECK(abel_T(lin, E) ==
              doctest::Approx(4.0 / 3.0 * std::pow(E - LO, 1.5)).epsilon(1e-10));
    }
}

TEST_CASE("abel_T of a sqrt-singular integrand is finite at the base") {
    const double c = 0.7;
    auto g = BandFunction::sample(
        LO, HI, [&](double u) { return c / std::sqrt(u - LO); }, EndBehavior::sqrt_singular);
    CHECK(abel_T(g, LO + 1e-9) == doctest::Approx(c * pi).epsilon(1e-6));
    CHECK(abel_T(g, LO + 0.5) == doctest::Approx(c * pi).epsilon(1e-8));
}

TEST_CASE("abel_A closed forms and the derivative identity") {
    auto one = BandFunction::sample(LO, HI, [](double) { return 1.0; });
    auto idf = BandFunction::sample(LO, HI, [](double u) { return u; });
    for (double E : {1.7, 2.3}) {
        CHECK(abel_A(one, E) == doctest::Approx(2.0 / 3.0 * std::pow(E - LO, 1.5)).epsilon(1e-10));
        double closed = E * 2.0 / 3.0 * std::pow(E - LO, 1.5) - 0.4 * std::pow(E - LO, 2.5);
        CHECK(abel_A(idf, E) == doctest::Approx(closed).epsilon(1e-10));
        // d/dE A g = (1/2) T g
        double de = 1e-5;
        double lhs = (abel_A(idf, E + de) - abel_A(idf, E - de)) / (2 * de);
        CHECK(lhs == doctest::Approx(0.5 * abel_T(idf, E)).epsilon(1e-6));
    }
}

TEST_CASE("transforms are linear") {
    auto f = BandFunction::sample(LO, HI, [](double u) { return std::sin(3.0 * u); });
    auto g = BandFunction::sample(LO, HI, [](double u) { return std::exp(-u); });
    auto comb = BandFunction::sample(
        LO, HI, [](double u) { return 2.5 * std::sin(3.0 * u) - 1.25 * std::exp(-u); });
    for (double E : {1.9, 2.5}) {
        CHECK(abel_T(comb, E) ==
              doctest::Approx(2.5 * abel_T(f, E) - 1.25 * abel_T(g, E)).epsilon(1e-11));
        CHECK(abel_A(comb, E) ==
              doctest::Approx(2.5 * abel_A(f, E) - 1.25 * abel_A(g, E)).epsilon(1e-11));
    }
}

TEST_CASE("abel_invert round trips") {
    // F = A[1] recovers g = 1
    auto F1 = BandFunction::sample(
        LO, HI, [](double E) { return 2.0 / 3.0 * std::pow(E - LO, 1.5); },
        EndBehavior::sqrt_zero);
    auto g1 = abel_invert(F1);
    for (double E : {1.45, 1.9, 2.4})
        CHECK(g1.value(E) == doctest::Approx(1.0).epsilon(1e-6));

    // polynomial g: forward by quadrature, invert, compare on the interior
    auto gp = BandFunction::sample(LO, HI, [](double u) { return 0.4 + 0.3 * (u - LO) * (u - LO); });
    auto Fp = BandFunction::sample(
        LO, HI, [&](double E) { return abel_A(gp, E, 1e-12); }, EndBehavior::sqrt_zero, 192);
    auto gr = abel_invert(Fp);
    double sup = 0.0;
    for (int i = 0; i <= 40; ++i) {
        double E = LO + 0.02 * (HI - LO) + (HI - LO) * 0.93 * i / 40.0;
        sup = std::max(sup, std::abs(gr.value(E) - gp.value(E)));
    }
    CHECK(sup < 1e-6);
}

TEST_CASE("abel_invert recovers a sqrt-singular integrand away from the base") {
    const double c = 0.55;
    auto gs = BandFunction::sample(
        LO, HI, [&](double u) { return c / std::sqrt(u - LO); }, EndBehavior::sqrt_singular);
    auto F = BandFunction::sample(
        LO, HI, [&](double E) { return abel_A(gs, E, 1e-12); }, EndBehavior::sqrt_zero, 192);
    auto gr = abel_invert(F, EndBehavior::sqrt_singular);
    for (double E : {LO + 0.15 * (HI - LO), LO + 0.5 * (HI - LO), LO + 0.85 * (HI - LO)}) {
        double truth = c / std::sqrt(E - LO);
        CHECK(std::abs(gr.value(E) - truth) / truth < 1e-4);
    }
}

TEST_CASE("b_forward: symmetric-well anchor value") {
    // Psi = 4 sqrt(c (E - E1)) for the symmetric quadratic well, mu'' = 2c
    const double e1 = LO, c = 0.8;
    auto psi = BandFunction::sample(
        e1, HI, [&](double u) { return 4.0 * std::sqrt(c * (u - e1)); },
        EndBehavior::sqrt_zero);
    double anchor = pi * std::sqrt(2.0 * e1 * 2.0 * c);
    CHECK(b_forward(psi, e1 + 1e-8) == doctest::Approx(anchor).epsilon(1e-4));
    CHECK(b_forward(psi, e1 + 1e-4) == doctest::Approx(anchor).epsilon(1e-2));
}

TEST_CASE("b_forward: zero in, zero out") {
    auto zero = BandFunction::sample(LO, HI, [](double) { return 0.0; },
                                     EndBehavior::sqrt_zero);
    CHECK(b_forward(zero, 2.0) == doctest::Approx(0.0));
}

TEST_CASE("b_forward requires the sqrt-zero tag") {
    auto f = BandFunction::sample(LO, HI, [](double) { return 1.0; });
    CHECK_THROWS_AS(b_forward(f, 2.0), input_error);
}

TEST_CASE("b_forward matches a brute-force substituted quadrature") {
    // generic tagged Psi = a sqrt(w) + b w^{3/2}, w = u - E1
    const double e1 = LO, a = 1.7, b = 0.6;
    auto psi = BandFunction::sample(
        e1, HI,
        [&](double u) {
            double w = u - e1;
            return a * std::sqrt(w) + b * w * std::sqrt(w);
        },
        EndBehavior::sqrt_zero, 192);
    auto brute = [&](double E) {
        double L = E - e1;
        auto f = [&](double th) {
            double s = std::sin(th);
            double w = L * s * s;
            double u = e1 + w;
            double dpsi = a / (2.0 * std::sqrt(w)) + 1.5 * b * std::sqrt(w);
            double ps = a * std::sqrt(w) + b * w * std::sqrt(w);
            double num = (7.0 * E - 6.0 * u) * dpsi - 2.0 * (E / u - 1.0) * ps;
            return num * 2.0 * std::sqrt(L) * s / std::sqrt(u);
        };
        return oracle::adaptive_simpson(f, 1e-8, M_PI / 2, 1e-12);
    };
    for (double E : {1.8, 2.2, 2.55})
        CHECK(b_forward(psi, E) == doctest::Approx(brute(E)).epsilon(1e-6));
}

TEST_CASE("b_invert round trip: symmetric-well Psi") {
    const double e1 = LO, c = 0.8;
    auto psi_true = [&](double u) { return 4.0 * std::sqrt(c * (u - e1)); };
    auto G = BandFunction::sample(
        e1, HI,
        [&](double E) {
            auto p = BandFunction::sample(e1, HI, psi_true, EndBehavior::sqrt_zero, 192);
            return b_forward(p, E, 1e-11);
        },
        EndBehavior::finite, 120, 1e-6);
    auto rec = b_invert(G, e1, 2.0 * c);
    double worst = 0.0;
    for (int i = 0; i <= 30; ++i) {
        double E = e1 + 0.02 * (HI - e1) + 0.96 * (HI - e1) * i / 30.0;
        worst = std::max(worst, std::abs(rec.value(E) - psi_true(E)) / psi_true(E));
    }
    CHECK(worst < 1e-3);
    // Psi(E1) = 0 by construction of the sqrt-zero representation
    CHECK(rec.value(e1) == doctest::Approx(0.0));
}

TEST_CASE("b_invert round trip: two-term Psi") {
    const double e1 = LO, a = 1.1, b = 0.8;
    auto psi_true = [&](double u) {
        double w = u - e1;
        return a * std::sqrt(w) + b * w * std::sqrt(w);
    };
    auto psi_bf = BandFunction::sample(e1, HI, psi_true, EndBehavior::sqrt_zero, 192);
    auto G = BandFunction::sample(
        e1, HI, [&](double E) { return b_forward(psi_bf, E, 1e-11); }, EndBehavior::finite,
        120, 1e-6);
    double curv = a * a / 8.0;  // a = 2 sqrt(2 mu'')
    auto rec = b_invert(G, e1, curv);
    double worst = 0.0;
    for (int i = 0; i <= 30; ++i) {
        double E = e1 + 0.03 * (HI - e1) + 0.95 * (HI - e1) * i / 30.0;
        worst = std::max(worst, std::abs(rec.value(E) - psi_true(E)) / psi_true(E));
    }
    CHECK(worst < 1e-3);
}
