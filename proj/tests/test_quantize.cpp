#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "support/oracles.hpp"

#include "specwell/presets.hpp"
#include "specwell/quantize.hpp"

using namespace specwell;

namespace {

ActionTable quad_table(double lo = 1.002, double hi = 3.8) {
    auto q = presets::quadratic_well();
    WellInterval w{-3.9, -0.1, -2.0, -2.0};
    ActionTableOpts opts;
    opts.n_points = 128;
    return build_action_table_full(*q.get(), w, 1, 1, lo, hi, opts);
}

}  // namespace

TEST_CASE("bs_spectrum_full tracks the whole-line solver") {
    auto q = presets::quadratic_well();
    auto table = quad_table();
    for (double h : {0.05, 0.025}) {
        auto bs = bs_spectrum_full(table, h);
        auto num = solve_wholeline(*q, h, 3.6);
        REQUIRE(!bs.eigenvalues.empty());
        double worst = 0.0;
        int used = 0;
        for (std::size_t i = 0; i < bs.eigenvalues.size(); ++i) {
            double e = bs.eigenvalues[i];
            if (e < 1.3 || e > 3.0) continue;
            int idx = bs.alphas[i] - 1;
            if (idx < 0 || idx >= static_cast<int>(num.eigenvalues.size())) continue;
            worst = std::max(worst, std::abs(num.eigenvalues[idx] - e));
            ++used;
        }
        REQUIRE(used >= 3);
        CHECK(worst < 2e-5);  // h^3-scale residual of the corrected rule
    }
}

TEST_CASE("leading-order count matches the action box count") {
    auto table = quad_table();
    double h = 0.05;
    BsOpts o0;
    o0.order = 0;
    auto bs = bs_spectrum_full(table, h, o0);
    Pchip s0(table.E, table.S0);
    double expected = std::floor(s0(table.band_hi) / (2 * pi * h) + 0.5);
    CHECK(std::abs(static_cast<double>(bs.eigenvalues.size()) - expected) <= 1.0);
}

TEST_CASE("large h yields an empty prediction set") {
    auto table = quad_table(1.02, 1.2);
    auto bs = bs_spectrum_full(table, 5.0);
    CHECK(bs.eigenvalues.empty());
}

TEST_CASE("half-well rule on the layer matches dispersion roots at O(h^2)") {
    auto layer = presets::layer(1.0, 4.0, 1.0);
    HalfWellInterval hw{-1.0 - 1e-9, -1e-9};
    ActionTableOpts topts;
    topts.n_points = 128;
    auto table = build_action_table_half(*layer, hw, 1, 0, 1.0, 4.0, topts);
    // fixed low modes alpha = 1..3 across the h-sequence
    std::vector<double> hs{0.05, 0.025, 0.0125};
    std::vector<double> errs;
    for (double h : hs) {
        auto bs = bs_spectrum_half(table, h);
        auto roots = oracle::layer_dispersion_roots(1, 4, 1, h, 4.0 * (1 - 1e-6));
        double worst = 0;
        int used = 0;
        for (std::size_t i = 0; i < bs.eigenvalues.size(); ++i) {
            int a = bs.alphas[i];
            if (a < 3 || a > 5) continue;  // fixed low modes present at every h
            REQUIRE(static_cast<int>(roots.size()) >= a);
            worst = std::max(worst, std::abs(bs.eigenvalues[i] - roots[a - 1]));
            ++used;
        }
        REQUIRE(used == 3);
        errs.push_back(worst);
    }
    // log-log slope >= 2 - margin
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < hs.size(); ++i) {
        lx.push_back(std::log(hs[i]));
        ly.push_back(std::log(errs[i]));
    }
    CHECK(linear_fit(lx, ly).second > 1.8);
}

TEST_CASE("the 3/4 Maslov offset beats 1/2 and 1/4 on the layer ladder") {
    auto layer = presets::layer(1.0, 4.0, 1.0);
    double h = 0.05;
    auto roots = oracle::layer_dispersion_roots(1, 4, 1, h, 4.0 * (1 - 1e-6));
    auto resid = [&](double offset) {
        // leading-order half-well ladder: sqrt(E-1) H = pi h (alpha - offset)
        double acc = 0.0;
        for (std::size_t a = 1; a <= roots.size(); ++a) {
            double k = pi * h * (static_cast<double>(a) - offset) / 1.0 / h;
            double e = 1.0 + h * h * k * k;
            acc += (e - roots[a - 1]) * (e - roots[a - 1]);
        }
        return acc;
    };
    double r34 = resid(0.75), r12 = resid(0.5), r14 = resid(0.25);
    CHECK(r34 < r12);
    CHECK(r34 < r14);
}

TEST_CASE("first prediction approaches E0 as h shrinks") {
    auto m = presets::monotone();
    auto cs = critical_structure(*m);
    auto d = decompose(*m, 1, cs);
    auto table = build_action_table_half(*m, d.half, 1, 0, 1.0, 2.0);
    double prev = 2.0;
    BsOpts o0;
    o0.order = 0;  // the leading rule is clean down to E0
    for (double h : {0.1, 0.05, 0.025, 0.0125}) {
        auto bs = bs_spectrum_half(table, h, o0);
        REQUIRE(!bs.eigenvalues.empty());
        CHECK(bs.eigenvalues.front() < prev);
        prev = bs.eigenvalues.front();
    }
    CHECK(prev < 1.1);
}

TEST_CASE("first_eigenvalue_rate: generic surface slope gives h^{2/3}") {
    auto m = presets::monotone();
    double expo = first_eigenvalue_rate(*m, {0.04, 0.02, 0.01, 0.005});
    CHECK(expo > 0.6);
    CHECK(expo < 0.75);
}

TEST_CASE("first_eigenvalue_rate: flat surface gives h") {
    auto m = presets::flat_start();
    double expo = first_eigenvalue_rate(*m, {0.04, 0.02, 0.01, 0.005});
    CHECK(expo > 0.85);
    CHECK(expo < 1.1);
}

TEST_CASE("first_eigenvalue_rate error paths") {
    auto m = presets::monotone();
    CHECK_THROWS_AS(first_eigenvalue_rate(*m, {0.05, 0.025}), input_error);
    auto c = presets::constant(2.0);
    CHECK_THROWS_AS(first_eigenvalue_rate(*c, {0.05, 0.025, 0.0125}), numeric_error);
}

TEST_CASE("semiclassical_spectrum: monotone preset is the half ladder alone") {
    auto m = presets::monotone();
    double h = 0.02;
    auto res = semiclassical_spectrum(*m, h);
    REQUIRE(!res.spectrum.eigenvalues.empty());
    for (int l : res.spectrum.labels) CHECK(l == 100);  // band 1 half well only

    auto cs = critical_structure(*m);
    auto d = decompose(*m, 1, cs);
    auto table = build_action_table_half(*m, d.half, 1, 0, 1.0,
                                         2.0 - 0.02 * 1.0);
    auto direct = bs_spectrum_half(table, h, BsOpts{}, 100);
    REQUIRE(res.spectrum.eigenvalues.size() == direct.eigenvalues.size());
    for (std::size_t i = 0; i < direct.eigenvalues.size(); ++i)
        CHECK(res.spectrum.eigenvalues[i] ==
              doctest::Approx(direct.eigenvalues[i]).epsilon(1e-9));
}

TEST_CASE("semiclassical_spectrum: single-well band ladders interleave and add up") {
    auto m = presets::single_well();
    double h = 0.01;
    auto res = semiclassical_spectrum(*m, h);
    // inside band 2 both ladders coexist
    auto cs = critical_structure(*m);
    double e1 = cs.points[0].e, e2 = cs.points[1].e;
    int n_well = 0, n_half = 0, n_total = 0;
    for (std::size_t i = 0; i < res.spectrum.eigenvalues.size(); ++i) {
        double e = res.spectrum.eigenvalues[i];
        if (e < e1 + 0.05 * (e2 - e1) || e > e2 - 0.05 * (e2 - e1)) continue;
        ++n_total;
        if (res.spectrum.labels[i] == 201) ++n_well;
        if (res.spectrum.labels[i] == 200) ++n_half;
    }
    CHECK(n_well > 3);
    CHECK(n_half > 3);
    CHECK(n_well + n_half == n_total);
    // counts match the forward solver in the same window
    auto num = solve_halfline(*m, h);
    int n_num = 0;
    for (double e : num.eigenvalues)
        if (e >= e1 + 0.05 * (e2 - e1) && e <= e2 - 0.05 * (e2 - e1)) ++n_num;
    CHECK(std::abs(n_num - n_total) <= 1);
}

TEST_CASE("labels partition the prediction list") {
    auto m = presets::single_well();
    auto res = semiclassical_spectrum(*m, 0.02);
    REQUIRE(res.spectrum.labels.size() == res.spectrum.eigenvalues.size());
    for (std::size_t i = 1; i < res.spectrum.eigenvalues.size(); ++i)
        CHECK(res.spectrum.eigenvalues[i] > res.spectrum.eigenvalues[i - 1]);
}

TEST_CASE("trace_check: Weyl term and full sum") {
    auto m = presets::monotone();
    auto cs = critical_structure(*m);
    auto d = decompose(*m, 1, cs);
    double lo = 1.0, hi = 2.0 - 0.02;
    auto table = build_action_table_half(*m, d.half, 1, 0, lo, hi);
    std::vector<ActionTable> tabs{table};
    double h = 0.01;
    double c = 1.45, w = 0.25;
    auto phi = bump_function(c, w);
    auto res = trace_check(tabs, h, 20, phi, c - w, c + w);
    // the m = 0 partial is the Weyl term
    CHECK(std::abs(res.partial[0].second - res.lhs) / std::abs(res.lhs) < 0.1);
    CHECK(res.residual < 5e-2);
    CHECK_THROWS_AS(trace_check(tabs, h, 0, phi, c - w, c + w), input_error);
}

TEST_CASE("trace_check: support below the first prediction") {
    auto m = presets::monotone();
    auto cs = critical_structure(*m);
    auto d = decompose(*m, 1, cs);
    auto table = build_action_table_half(*m, d.half, 1, 0, 1.0, 2.0 - 0.02);
    std::vector<ActionTable> tabs{table};
    double h = 0.05;
    auto bs = bs_spectrum_half(table, h);
    REQUIRE(!bs.eigenvalues.empty());
    double nu1 = bs.eigenvalues.front();
    // bump squeezed between the band bottom and the first prediction
    double c = 0.5 * (1.0 + nu1), w = 0.35 * (nu1 - 1.0);
    auto res10 = trace_check(tabs, h, 10, bump_function(c, w), c - w, c + w);
    auto res40 = trace_check(tabs, h, 40, bump_function(c, w), c - w, c + w);
    CHECK(res10.lhs == doctest::Approx(0.0));
    CHECK(std::abs(res40.rhs) < std::abs(res10.partial[0].second));
}

TEST_CASE("trace_check residual shrinks with m_max") {
    auto m = presets::monotone();
    auto cs = critical_structure(*m);
    auto d = decompose(*m, 1, cs);
    auto table = build_action_table_half(*m, d.half, 1, 0, 1.0, 2.0 - 0.02);
    std::vector<ActionTable> tabs{table};
    double h = 0.02, c = 1.5, w = 0.3;
    auto phi = bump_function(c, w);
    auto res = trace_check(tabs, h, 12, phi, c - w, c + w);
    double r0 = std::abs(res.partial[0].second - res.lhs);
    double r3 = std::abs(res.partial[3].second - res.lhs);
    double rN = std::abs(res.partial.back().second - res.lhs);
    CHECK(r3 <= r0 * 1.5);
    CHECK(rN <= r3 * 1.5);
    CHECK(rN / std::max(std::abs(res.lhs), 1e-12) < 5e-2);
}
