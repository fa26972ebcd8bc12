#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "specwell/deriv.hpp"
#include "specwell/interp.hpp"
#include "specwell/ode.hpp"
#include "specwell/quadrature.hpp"
#include "specwell/rootfind.hpp"

using namespace specwell;

TEST_CASE("cubic spline reproduces cubics exactly") {
    auto xs = linspace(-2.0, 3.0, 17);
    std::vector<double> ys(xs.size());
    auto f = [](double x) { return 0.3 * x * x * x - x * x + 2.0 * x - 5.0; };
    for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = f(xs[i]);
    CubicSpline s(xs, ys);
    for (double x : {-1.97, -0.4, 0.0, 1.13, 2.999}) {
        CHECK(s.eval(x, 0) == doctest::Approx(f(x)).epsilon(1e-12));
        CHECK(s.eval(x, 1) == doctest::Approx(0.9 * x * x - 2 * x + 2).epsilon(1e-10));
        CHECK(s.eval(x, 2) == doctest::Approx(1.8 * x - 2).epsilon(1e-9));
    }
}

TEST_CASE("spline converges on smooth data") {
    auto f = [](double x) { return std::sin(2.0 * x) * std::exp(0.3 * x); };
    auto xs = linspace(0.0, 3.0, 101);
    std::vector<double> ys(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = f(xs[i]);
    CubicSpline s(xs, ys);
    double worst = 0;
    for (int i = 0; i < 500; ++i) {
        double x = 0.001 + 2.997 * i / 499.0;
        worst = std::max(worst, std::abs(s(x) - f(x)));
    }
    CHECK(worst < 2e-6);
}

TEST_CASE("pchip preserves monotone data") {
    std::vector<double> xs{0, 1, 2, 3, 4, 5};
    std::vector<double> ys{0, 0.1, 0.2, 3.0, 3.05, 3.1};
    Pchip p(xs, ys);
    double prev = p(0.0);
    for (int i = 1; i <= 500; ++i) {
        double v = p(5.0 * i / 500.0);
        CHECK(v >= prev - 1e-14);
        prev = v;
    }
}

TEST_CASE("gauss-legendre integrates polynomials exactly") {
    auto f = [](double x) { return 5 * x * x * x - x + 2; };
    CHECK(gauss(f, -1.0, 2.0, 8) == doctest::Approx(5.0 / 4 * (16 - 1) - (4 - 1) / 2.0 + 2 * 3)
                                        .epsilon(1e-14));
}

TEST_CASE("sqrt-endpoint substitutions") {
    // integral over (0,1) of 1/sqrt(x) = 2
    CHECK(integrate_invsqrt_left([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0) ==
          doctest::Approx(2.0).epsilon(1e-12));
    // integral over (-1,1) of 1/sqrt(1-x^2) = pi
    CHECK(integrate_invsqrt_both([](double x) { return 1.0 / std::sqrt(1 - x * x); }, -1.0,
                                 1.0) == doctest::Approx(pi).epsilon(1e-12));
    // abel kernel: integral over (0,E) du/sqrt(u(E-u)) = pi
    double v = integrate_abel_kernel(
        [](double, double, double) { return 1.0; }, 0.0, 2.7);
    CHECK(v == doctest::Approx(pi).epsilon(1e-13));
}

TEST_CASE("brent finds roots to machine precision") {
    double r = brent([](double x) { return std::cos(x) - x; }, 0.0, 1.0);
    CHECK(std::abs(std::cos(r) - r) < 1e-14);
}

TEST_CASE("rk45 integrates the harmonic oscillator") {
    Rk45<2> integ([](double, const Rk45<2>::State& y, Rk45<2>::State& dy) {
        dy[0] = y[1];
        dy[1] = -y[0];
    });
    auto y = integ.integrate(0.0, {1.0, 0.0}, 2.0 * pi);
    CHECK(y[0] == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(std::abs(y[1]) < 1e-8);
}

TEST_CASE("five-point derivatives") {
    auto f = [](double x) { return std::exp(x) * std::sin(3 * x); };
    double x = 0.7;
    double d1 = std::exp(x) * (std::sin(3 * x) + 3 * std::cos(3 * x));
    double d2 = std::exp(x) * (std::sin(3 * x) + 6 * std::cos(3 * x) - 9 * std::sin(3 * x));
    CHECK(diff1(f, x, 1e-2) == doctest::Approx(d1).epsilon(1e-7));
    CHECK(diff2(f, x, 1e-2) == doctest::Approx(d2).epsilon(1e-6));
}

TEST_CASE("polyfit round trip") {
    std::vector<double> xs = linspace(2.0, 9.0, 25), ys(25);
    for (int i = 0; i < 25; ++i) ys[i] = 4.2 - 0.3 * xs[i] + 0.07 * xs[i] * xs[i];
    auto c = polyfit(xs, ys, 2);
    CHECK(polyval(c, 5.0) == doctest::Approx(4.2 - 1.5 + 1.75).epsilon(1e-12));
    CHECK(polyval(c, 5.0, 1) == doctest::Approx(-0.3 + 0.7).epsilon(1e-10));
    CHECK(polyval(c, 5.0, 2) == doctest::Approx(0.14).epsilon(1e-10));
}
