#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "specwell/presets.hpp"
#include "specwell/actions.hpp"
#include "specwell/profile.hpp"

using namespace specwell;

namespace {

std::unique_ptr<SampledProfile> linear_profile() {
    auto m = presets::monotone();
    return sample_profile(*m, 201);
}

}  // namespace

TEST_CASE("evaluate: linear profile") {
    auto p = linear_profile();
    CHECK(evaluate(*p, -0.5, 0) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(evaluate(*p, -0.5, 1) == doctest::Approx(-1.0).epsilon(1e-10));
    // constant extension below Z_I
    CHECK(evaluate(*p, -2.0, 0) == doctest::Approx(2.0));
    CHECK(evaluate(*p, -2.0, 1) == doctest::Approx(0.0));
    CHECK_THROWS_AS(evaluate(*p, 0.5, 0), input_error);
}

TEST_CASE("profile invariants enforced") {
    // mu(0) must be the minimum
    std::vector<double> grid = {-1.0, -0.5, -0.25, 0.0};
    CHECK_THROWS_AS(SampledProfile(grid, {2.0, 1.0, 0.9, 1.5}, 2.0), input_error);
    // grid must end at 0
    CHECK_THROWS_AS(SampledProfile({-1.0, -0.6, -0.4, -0.2}, {2.0, 1.5, 1.4, 1.2}, 2.0),
                    input_error);
    // positive values
    CHECK_THROWS_AS(SampledProfile(grid, {2.0, -1.0, 0.5, 0.1}, 2.0), input_error);
}

TEST_CASE("critical_structure: single-well preset") {
    auto m = presets::single_well();
    auto cs = critical_structure(*m);
    REQUIRE(cs.points.size() == 2);
    // interior minimum at Z = -2 with value 1.2 and curvature 12.8 (exact
    // closures of the preset formula away from the blend region)
    CHECK(cs.points[0].z == doctest::Approx(-2.0).epsilon(1e-8));
    CHECK(cs.points[0].e == doctest::Approx(1.2).epsilon(1e-10));
    CHECK(cs.points[0].curvature == doctest::Approx(12.8).epsilon(1e-7));
    CHECK(cs.points[0].kind == CriticalPoint::Kind::minimum);
    CHECK(cs.points[1].kind == CriticalPoint::Kind::maximum);
    CHECK(cs.points[1].e > cs.points[0].e);
    CHECK(cs.points[1].e < cs.mu_I);
    // z_star is the shallowest critical point (the barrier)
    CHECK(cs.z_star == doctest::Approx(cs.points[1].z));
}

TEST_CASE("critical_structure: strictly decreasing profile") {
    auto m = presets::monotone();
    auto cs = critical_structure(*m);
    CHECK(cs.points.empty());
    CHECK(cs.z_star == doctest::Approx(m->z_min()));
    CHECK_FALSE(cs.flat_surface);
}

TEST_CASE("critical_structure: flat surface flagged") {
    auto m = presets::flat_start();
    auto cs = critical_structure(*m);
    CHECK(cs.flat_surface);
}

TEST_CASE("critical_structure: equal-depth wells rejected") {
    // two identical Gaussian wells -> equal critical values
    AnalyticProfile twin(
        [](double Z) {
            return 2.0 - 0.6 * std::exp(-2.0 * (Z + 2.0) * (Z + 2.0)) -
                   0.6 * std::exp(-2.0 * (Z + 5.0) * (Z + 5.0));
        },
        [](double Z) {
            return 2.4 * (Z + 2.0) * std::exp(-2.0 * (Z + 2.0) * (Z + 2.0)) +
                   2.4 * (Z + 5.0) * std::exp(-2.0 * (Z + 5.0) * (Z + 5.0));
        },
        [](double Z) {
            auto term = [](double u) {
                return 2.4 * (1.0 - 4.0 * u * u) * std::exp(-2.0 * u * u);
            };
            return term(Z + 2.0) + term(Z + 5.0);
        },
        -7.0);
    CHECK_THROWS_AS(critical_structure(twin), numeric_error);
}

TEST_CASE("decompose: single-well preset band structure") {
    auto m = presets::single_well();
    auto cs = critical_structure(*m);
    auto d1 = decompose(*m, 1, cs);
    CHECK(d1.wells.size() == 0);  // below the first interior critical value
    auto d2 = decompose(*m, 2, cs);
    CHECK(d2.wells.size() == 1);  // one component separated from the boundary
    auto d3 = decompose(*m, 3, cs);
    CHECK(d3.wells.size() == 0);  // merged over the barrier
}

TEST_CASE("decompose: monotone preset has only the half well") {
    auto m = presets::monotone();
    auto cs = critical_structure(*m);
    auto d = decompose(*m, 1, cs);
    CHECK(d.wells.empty());
    CHECK(d.half.z_top < d.half.z_bot);
    CHECK_THROWS_AS(decompose(*m, 5, cs), input_error);
}

TEST_CASE("decompose: two-well preset counts per band") {
    auto m = presets::two_well();
    auto cs = critical_structure(*m);
    REQUIRE(cs.points.size() == 4);
    CHECK(decompose(*m, 1, cs).wells.size() == 0);
    CHECK(decompose(*m, 2, cs).wells.size() == 1);
    CHECK(decompose(*m, 3, cs).wells.size() == 2);
    CHECK(decompose(*m, 4, cs).wells.size() == 1);
    CHECK(decompose(*m, 5, cs).wells.size() == 0);
}

TEST_CASE("decompose nesting: lower-order wells sit inside higher-order ones") {
    auto m = presets::two_well();
    auto cs = critical_structure(*m);
    auto d3 = decompose(*m, 3, cs);
    auto d4 = decompose(*m, 4, cs);
    REQUIRE(d4.wells.size() == 1);
    for (const auto& w : d3.wells) {
        CHECK(w.z_left_top >= d4.wells[0].z_left_top - 1e-9);
        CHECK(w.z_right_top <= d4.wells[0].z_right_top + 1e-9);
    }
}

TEST_CASE("turning residual invariant across a band") {
    auto m = presets::single_well();
    auto cs = critical_structure(*m);
    auto d = decompose(*m, 2, cs);
    REQUIRE(d.wells.size() == 1);
    for (int i = 1; i <= 8; ++i) {
        double E = d.e_lo + (d.e_hi - d.e_lo) * i / 9.0;
        auto t = turning_points_full(*m, E, d.wells[0]);
        CHECK(std::abs(m->value(t.f_minus) - E) < 1e-10 * m->floor_value());
        CHECK(std::abs(m->value(t.f_plus) - E) < 1e-10 * m->floor_value());
        CHECK(t.f_minus < t.f_plus);
        double f = turning_point_half(*m, E, d.half);
        CHECK(std::abs(m->value(f) - E) < 1e-10 * m->floor_value());
        CHECK(f > t.f_plus);  // well interval disjoint from the half well
    }
}

TEST_CASE("critical scan of a mirrored window") {
    // mirror-reflected window: same critical values, mirrored depths
    auto base = [](double Z) { return 1.5 - 0.4 * std::exp(-3.0 * (Z + 1.7) * (Z + 1.7)); };
    auto dbase = [](double Z) {
        return 2.4 * (Z + 1.7) * std::exp(-3.0 * (Z + 1.7) * (Z + 1.7));
    };
    auto d2base = [](double Z) {
        return 2.4 * (1.0 - 6.0 * (Z + 1.7) * (Z + 1.7)) *
               std::exp(-3.0 * (Z + 1.7) * (Z + 1.7));
    };
    const double zc = -4.0;  // mirror about zc/2 = -2: Z -> -4 - Z
    AnalyticProfile fwd(base, dbase, d2base, -4.0, 0.0);
    AnalyticProfile mir([&](double Z) { return base(zc - Z); },
                        [&](double Z) { return -dbase(zc - Z); },
                        [&](double Z) { return d2base(zc - Z); }, -4.0, 0.0);
    auto cf = critical_structure(fwd);
    auto cm = critical_structure(mir);
    REQUIRE(cf.points.size() == cm.points.size());
    for (std::size_t i = 0; i < cf.points.size(); ++i) {
        CHECK(cm.points[i].e == doctest::Approx(cf.points[i].e).epsilon(1e-9));
        CHECK(cm.points[i].z == doctest::Approx(zc - cf.points[i].z).epsilon(1e-7));
    }
}
