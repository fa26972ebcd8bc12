#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "specwell/common.hpp"

namespace specwell {

/// Adaptive Cash-Karp RK45 for small fixed-dimension systems.
template <int N>
class Rk45 {
  public:
    using State = std::array<double, N>;
    using Rhs = std::function<void(double, const State&, State&)>;

    explicit Rk45(Rhs rhs, double rtol = 1e-10, double atol = 1e-12)
        : rhs_(std::move(rhs)), rtol_(rtol), atol_(atol) {}

    /// Advance from (t, y) to t_end; calls observer after each accepted step.
    /// Returns the final state.
    State integrate(double t, State y, double t_end,
                    const std::function<void(double, const State&)>& observer = nullptr) const {
        double dir = (t_end >= t) ? 1.0 : -1.0;
        double dt = dir * std::max(1e-10, std::abs(t_end - t) / 100.0);
        int guard = 0;
        while (dir * (t_end - t) > 0.0) {
            if (++guard > 2000000) throw numeric_error("rk45: step limit exceeded");
            if (dir * (t + dt - t_end) > 0.0) dt = t_end - t;
            State y_new, err;
            step(t, y, dt, y_new, err);
            double sc = 0.0;
            for (int i = 0; i < N; ++i) {
                double tol = atol_ + rtol_ * std::max(std::abs(y[i]), std::abs(y_new[i]));
                sc = std::max(sc, std::abs(err[i]) / tol);
            }
            if (sc <= 1.0) {
                t += dt;
                y = y_new;
                if (observer) observer(t, y);
            }
            double fac = 0.9 * std::pow(std::max(sc, 1e-10), -0.2);
            dt *= std::clamp(fac, 0.2, 5.0);
            if (std::abs(dt) < 1e-15 * std::max(1.0, std::abs(t)))
                throw numeric_error("rk45: step underflow");
        }
        return y;
    }

    void step(double t, const State& y, double dt, State& out, State& err) const {
        constexpr double a2 = 0.2, a3 = 0.3, a4 = 0.6, a5 = 1.0, a6 = 0.875;
        constexpr double b21 = 0.2;
        constexpr double b31 = 3.0 / 40.0, b32 = 9.0 / 40.0;
        constexpr double b41 = 0.3, b42 = -0.9, b43 = 1.2;
        constexpr double b51 = -11.0 / 54.0, b52 = 2.5, b53 = -70.0 / 27.0, b54 = 35.0 / 27.0;
        constexpr double b61 = 1631.0 / 55296.0, b62 = 175.0 / 512.0, b63 = 575.0 / 13824.0,
                         b64 = 44275.0 / 110592.0, b65 = 253.0 / 4096.0;
        constexpr double c1 = 37.0 / 378.0, c3 = 250.0 / 621.0, c4 = 125.0 / 594.0,
                         c6 = 512.0 / 1771.0;
        constexpr double d1 = c1 - 2825.0 / 27648.0, d3 = c3 - 18575.0 / 48384.0,
                         d4 = c4 - 13525.0 / 55296.0, d5 = -277.0 / 14336.0,
                         d6 = c6 - 0.25;
        State k1, k2, k3, k4, k5, k6, tmp;
        rhs_(t, y, k1);
        for (int i = 0; i < N; ++i) tmp[i] = y[i] + dt * b21 * k1[i];
        rhs_(t + a2 * dt, tmp, k2);
        for (int i = 0; i < N; ++i) tmp[i] = y[i] + dt * (b31 * k1[i] + b32 * k2[i]);
        rhs_(t + a3 * dt, tmp, k3);
        for (int i = 0; i < N; ++i) tmp[i] = y[i] + dt * (b41 * k1[i] + b42 * k2[i] + b43 * k3[i]);
        rhs_(t + a4 * dt, tmp, k4);
        for (int i = 0; i < N; ++i)
            tmp[i] = y[i] + dt * (b51 * k1[i] + b52 * k2[i] + b53 * k3[i] + b54 * k4[i]);
        rhs_(t + a5 * dt, tmp, k5);
        for (int i = 0; i < N; ++i)
            tmp[i] = y[i] + dt * (b61 * k1[i] + b62 * k2[i] + b63 * k3[i] + b64 * k4[i] +
                                  b65 * k5[i]);
        rhs_(t + a6 * dt, tmp, k6);
        for (int i = 0; i < N; ++i) {
            out[i] = y[i] + dt * (c1 * k1[i] + c3 * k3[i] + c4 * k4[i] + c6 * k6[i]);
            err[i] = dt * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i]);
        }
    }

  private:
    Rhs rhs_;
    double rtol_, atol_;
};

}  // namespace specwell
