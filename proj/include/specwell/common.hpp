#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace specwell {

// Error taxonomy mirrors the CLI exit-code contract:
//   input_error -> 1, numeric_error -> 2, reconstruction_error -> 3.
struct input_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct reconstruction_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr double pi = 3.14159265358979323846;

inline std::vector<double> linspace(double a, double b, std::size_t n) {
    if (n < 2) return {a};
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i)
        x[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    x.back() = b;
    return x;
}

/// Geometric clustering toward both ends of [a,b]; used for E-grids that
/// must resolve band-edge behavior.
inline std::vector<double> edge_refined_grid(double a, double b, std::size_t n,
                                             double power = 2.0) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        double t = static_cast<double>(i) / static_cast<double>(n - 1);
        double s = 0.5 * (1.0 + std::tanh(power * (2.0 * t - 1.0)) / std::tanh(power));
        x[i] = a + (b - a) * s;
    }
    x.front() = a;
    x.back() = b;
    return x;
}

template <class T> int sgn(T v) { return (T(0) < v) - (v < T(0)); }

// Deterministic slot-parallel loop: each index writes its own result, so the
// output is bitwise independent of scheduling.
inline unsigned worker_cap = 0;  // 0 = hardware_concurrency

inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    unsigned hw = worker_cap ? worker_cap : std::thread::hardware_concurrency();
    if (hw <= 1 || n < 4) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    unsigned nw = std::min<unsigned>(hw, static_cast<unsigned>(n));
    std::vector<std::thread> pool;
    pool.reserve(nw);
    std::exception_ptr err;
    std::mutex err_mtx;
    for (unsigned w = 0; w < nw; ++w) {
        pool.emplace_back([&, w]() {
            try {
                for (std::size_t i = w; i < n; i += nw) body(i);
            } catch (...) {
                std::lock_guard<std::mutex> g(err_mtx);
                if (!err) err = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace specwell
