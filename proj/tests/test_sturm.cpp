#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "support/oracles.hpp"

#include "specwell/presets.hpp"
#include "specwell/quadrature.hpp"
#include "specwell/sturm.hpp"

using namespace specwell;

TEST_CASE("layer preset matches the dispersion-relation roots") {
    auto layer = presets::layer(1.0, 4.0, 1.0);
    for (double h : {0.2, 0.1}) {
        SturmOpts opts;
        opts.points_per_wavelength = 60;
        auto s = solve_halfline(*layer, h, opts);
        auto roots = oracle::layer_dispersion_roots(1.0, 4.0, 1.0, h, 4.0 * (1.0 - 1e-6));
        REQUIRE(s.eigenvalues.size() == roots.size());
        for (std::size_t i = 0; i < roots.size(); ++i)
            CHECK(s.eigenvalues[i] ==
                  doctest::Approx(roots[i]).epsilon(2e-6));
    }
}

TEST_CASE("constant profile has an empty point spectrum") {
    auto c = presets::constant(2.0);
    auto s = solve_halfline(*c, 0.1);
    CHECK(s.eigenvalues.empty());
}

TEST_CASE("eigenvalue count follows the Weyl area") {
    auto m = presets::monotone();
    double h = 0.02;
    auto s = solve_halfline(*m, h);
    // Area{mu (1+zeta^2) <= E} at E = ceiling, by quadrature:
    // 2 * integral sqrt((E-mu)/mu)
    double E = 2.0 * (1.0 - 1e-6);
    double area = 2.0 * integrate_invsqrt_left(
                            [&](double Z) {
                                double mu = m->value(Z);
                                return std::sqrt(std::max(E - mu, 0.0) / mu);
                            },
                            -1.0, 0.0);
    double predicted = area / (2.0 * pi * h);
    CHECK(std::abs(static_cast<double>(s.eigenvalues.size()) - predicted) <= 1.5);
}

TEST_CASE("counting function basics") {
    SpectralData s;
    s.h = 0.1;
    s.eigenvalues = {1.2, 1.5, 1.9};
    CHECK(counting_function(s, 1.0) == 0);   // below lambda_1
    CHECK(counting_function(s, 1.5) == 2);
    CHECK(counting_function(s, 5.0) == 3);   // total count
}

TEST_CASE("layer counting vs phase-space area at small h") {
    auto layer = presets::layer(1.0, 4.0, 1.0);
    double h = 0.01;
    SturmOpts opts;
    opts.points_per_wavelength = 25;
    auto s = solve_halfline(*layer, h, opts);
    for (double E : {2.0, 3.0, 3.7}) {
        double area = 2.0 * std::sqrt(E - 1.0) * 1.0;  // constant integrand, H = 1
        double n_weyl = area / (2.0 * pi * h);
        CHECK(std::abs(counting_function(s, E) - n_weyl) <= 1.0 + 0.05 * n_weyl);
    }
}

TEST_CASE("halving h roughly doubles the count") {
    auto q = presets::quadratic_well();
    auto s1 = solve_wholeline(*q, 0.1, 3.5);
    auto s2 = solve_wholeline(*q, 0.05, 3.5);
    CHECK(s2.eigenvalues.size() >= 2 * s1.eigenvalues.size() - 2);
    CHECK(s2.eigenvalues.size() <= 2 * s1.eigenvalues.size() + 2);
}

TEST_CASE("wholeline window must contain the well") {
    auto q = presets::quadratic_well(-2.5, 0.0);  // cut inside the well at E > 1.25
    CHECK_THROWS_AS(solve_wholeline(*q, 0.05, 3.0), input_error);
}

TEST_CASE("grid refinement shrinks the eigenvalue error ~4x") {
    auto layer = presets::layer(1.0, 4.0, 1.0);
    double h = 0.1;
    auto roots = oracle::layer_dispersion_roots(1.0, 4.0, 1.0, h, 4.0 * (1.0 - 1e-6));
    REQUIRE(!roots.empty());
    SturmOpts o1;
    o1.points_per_wavelength = 15;
    o1.richardson = false;
    SturmOpts o2 = o1;
    o2.points_per_wavelength = 30;
    auto s1 = solve_halfline(*layer, h, o1);
    auto s2 = solve_halfline(*layer, h, o2);
    REQUIRE(s1.eigenvalues.size() >= roots.size() - 1);
    double e1 = std::abs(s1.eigenvalues[0] - roots[0]);
    double e2 = std::abs(s2.eigenvalues[0] - roots[0]);
    CHECK(e1 / e2 > 2.8);  // second-order scheme: ratio about 4
    CHECK(e1 / e2 < 5.5);
}

TEST_CASE("spectrum is simple: gaps strictly positive") {
    auto sw = presets::single_well();
    auto s = solve_halfline(*sw, 0.02);
    REQUIRE(s.eigenvalues.size() > 5);
    for (std::size_t i = 1; i < s.eigenvalues.size(); ++i)
        CHECK(s.eigenvalues[i] > s.eigenvalues[i - 1]);
}

TEST_CASE("deeper truncation does not move eigenvalues") {
    auto m = presets::monotone();
    double h = 0.05;
    SturmOpts o1;
    o1.depth_factor = 10.0;
    SturmOpts o2;
    o2.depth_factor = 16.0;
    auto s1 = solve_halfline(*m, h, o1);
    auto s2 = solve_halfline(*m, h, o2);
    REQUIRE(s1.eigenvalues.size() == s2.eigenvalues.size());
    for (std::size_t i = 0; i < s1.eigenvalues.size(); ++i)
        CHECK(std::abs(s1.eigenvalues[i] - s2.eigenvalues[i]) < 1e-8);
}

TEST_CASE("bad h rejected") {
    auto m = presets::monotone();
    CHECK_THROWS_AS(solve_halfline(*m, -0.1), input_error);
    CHECK_THROWS_AS(solve_halfline(*m, 0.0), input_error);
}
