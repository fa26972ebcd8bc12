#pragma once

#include <cmath>
#include <functional>

#include "specwell/common.hpp"

namespace specwell {

/// 5-point central first derivative of a callable.
template <class F>
double diff1(const F& f, double x, double h) {
    return (8.0 * (f(x + h) - f(x - h)) - (f(x + 2 * h) - f(x - 2 * h))) / (12.0 * h);
}

/// 5-point central second derivative of a callable.
template <class F>
double diff2(const F& f, double x, double h) {
    return (-(f(x + 2 * h) + f(x - 2 * h)) + 16.0 * (f(x + h) + f(x - h)) - 30.0 * f(x)) /
           (12.0 * h * h);
}

}  // namespace specwell
