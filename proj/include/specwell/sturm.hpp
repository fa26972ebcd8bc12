#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "specwell/common.hpp"
#include "specwell/model.hpp"
#include "specwell/profile.hpp"

namespace specwell {

struct SpectralData {
    double h = 0.0;
    std::vector<double> eigenvalues;
    std::vector<int> labels;   // well id per eigenvalue; empty if unlabeled
    std::vector<int> alphas;   // quantization index per eigenvalue (predictions)
    std::string provenance = "numeric";

    bool labeled() const { return labels.size() == eigenvalues.size(); }
};

/// [OPERATION] counting_function: N(h,E) = #{lambda_j <= E}.
inline int counting_function(const SpectralData& s, double E) {
    return static_cast<int>(std::upper_bound(s.eigenvalues.begin(), s.eigenvalues.end(), E) -
                            s.eigenvalues.begin());
}

struct SturmOpts {
    double points_per_wavelength = 40.0;  // spatial resolution of the shortest wave
    int grid_n = 0;                       // explicit node count override (0 = automatic)
    double ceiling_margin_rel = 1e-6;     // reject eigenvalues within this of mu_I
    double depth_factor = 10.0;           // decay lengths of padding below Z_I
    bool richardson = true;               // refine once and extrapolate
    double e_floor = -1.0;                // report eigenvalues above this (default E0)
    double e_ceiling = -1.0;              // optional hard ceiling (< mu_I margin rule)
};

namespace detail {

/// Number of eigenvalues of the symmetric tridiagonal (d, e) below x,
/// by the Sturm sequence of LDL^T pivots.
inline int sturm_count(const std::vector<double>& d, const std::vector<double>& e, double x) {
    const double tiny = 1e-300;
    int count = 0;
    double q = d[0] - x;
    if (q < 0) ++count;
    for (std::size_t i = 1; i < d.size(); ++i) {
        if (q == 0.0) q = -tiny;
        q = d[i] - x - e[i - 1] * e[i - 1] / q;
        if (q < 0) ++count;
    }
    return count;
}

/// Eigenvalues of (d, e) inside (lo, hi) by index-wise bisection.
inline std::vector<double> tridiag_eigs_in(const std::vector<double>& d,
                                           const std::vector<double>& e, double lo, double hi) {
    int n_lo = sturm_count(d, e, lo);
    int n_hi = sturm_count(d, e, hi);
    int m = n_hi - n_lo;
    std::vector<double> out(std::max(m, 0));
    parallel_for(static_cast<std::size_t>(std::max(m, 0)), [&](std::size_t j) {
        int target = n_lo + static_cast<int>(j) + 1;  // want count(x) >= target
        double a = lo, b = hi;
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (a + b);
            if (mid == a || mid == b) break;
            if (sturm_count(d, e, mid) >= target) b = mid;
            else a = mid;
        }
        out[j] = 0.5 * (a + b);
    });
    return out;
}

struct Assembled {
    std::vector<double> d, e;
    double dz;
};

/// Conservative second-order scheme for -h^2 (mu u')' + mu u with harmonic
/// flux coefficients. Dirichlet at the deep end; optional Neumann half cell
/// at Z = z_top (the free surface).
inline Assembled assemble(const ProfileModel& p, double h, double z_bot, double z_top, int n_nodes,
                          bool neumann_top) {
    Assembled A;
    const int N = n_nodes;
    const double dz = (z_top - z_bot) / N;
    A.dz = dz;
    std::vector<double> flux(N);  // flux coefficient on cell (i, i+1)
    std::vector<double> Z(N + 1);
    for (int i = 0; i <= N; ++i) Z[i] = z_bot + dz * i;
    for (int i = 0; i < N; ++i) flux[i] = p.harmonic_mean(Z[i], Z[i + 1]);

    const double w = h * h / (dz * dz);
    auto pot = [&](int i) {  // cell-averaged potential around node i
        return p.mean(Z[i] - 0.5 * dz, Z[i] + 0.5 * dz);
    };
    if (neumann_top) {
        // unknowns at nodes 1..N; last row is the surface half cell
        A.d.resize(N);
        A.e.resize(N - 1);
        for (int i = 1; i < N; ++i) A.d[i - 1] = w * (flux[i - 1] + flux[i]) + pot(i);
        for (int i = 1; i + 1 < N; ++i) A.e[i - 1] = -w * flux[i];
        A.d[N - 1] = 2.0 * w * flux[N - 1] + p.mean(Z[N] - 0.5 * dz, Z[N]);
        A.e[N - 2] = -std::sqrt(2.0) * w * flux[N - 1];
    } else {
        // Dirichlet both ends: unknowns 1..N-1
        A.d.resize(N - 1);
        A.e.resize(N - 2);
        for (int i = 1; i < N; ++i) A.d[i - 1] = w * (flux[i - 1] + flux[i]) + pot(i);
        for (int i = 1; i + 1 < N; ++i) A.e[i - 1] = -w * flux[i];
    }
    return A;
}

struct GridPlan {
    int n;
    double z_bot;
};

/// Choose spacing that resolves the shortest wavelength and, when the profile
/// has a discontinuity, divides the jump depth exactly so the interface lands
/// on a grid node. z_bot is deepened to the nearest node.
inline GridPlan plan_grid(const ProfileModel& p, double h, double z_bot_req, double z_top,
                          const SturmOpts& opts, double e_cap) {
    double dz;
    if (opts.grid_n > 0) {
        dz = (z_top - z_bot_req) / opts.grid_n;
    } else {
        double e0 = p.value(z_top);
        double kmax = std::sqrt(std::max(e_cap / e0 - 1.0, 0.25)) / h;
        dz = 2.0 * pi / kmax / opts.points_per_wavelength;
        dz = std::min(dz, (z_top - z_bot_req) / 200.0);
    }
    auto jumps = p.jump_points();
    if (!jumps.empty()) {
        double Hj = z_top - jumps.front();
        int m = std::max(1, static_cast<int>(std::round(Hj / dz)));
        dz = Hj / m;
    }
    int N = static_cast<int>(std::ceil((z_top - z_bot_req) / dz - 1e-9));
    return {N, z_top - N * dz};
}

}  // namespace detail

/// [OPERATION] solve_halfline: the discrete spectrum of
/// L_h = -h^2 d/dZ (mu d/dZ) + mu with Neumann surface condition.
inline SpectralData solve_halfline(const ProfileModel& p, double h, SturmOpts opts = {}) {
    if (h <= 0) throw input_error("solve_halfline: h must be positive");
    const double e0 = p.surface_value();
    const double mu_I = p.floor_value();
    const double ceiling =
        opts.e_ceiling > 0 ? opts.e_ceiling : mu_I * (1.0 - opts.ceiling_margin_rel);
    const double floor_e = opts.e_floor > 0 ? opts.e_floor : e0 * (1.0 + 1e-12);
    SpectralData out;
    out.h = h;
    out.provenance = "numeric";
    if (ceiling <= floor_e) return out;

    // depth iteration: start from a moderate depth guess, deepen until the
    // reported spectrum stops moving
    double e_top_guess = std::min(ceiling, mu_I - 0.05 * (mu_I - e0));
    std::vector<double> prev;
    double z_bot_floor = p.z_min();  // never shrink the domain between passes
    for (int pass = 0; pass < 4; ++pass) {
        double decay = h / std::sqrt(std::max(1.0 - e_top_guess / mu_I, 1e-12));
        double z_bot_req = std::min(z_bot_floor, p.z_min() - opts.depth_factor * decay);
        z_bot_floor = z_bot_req;
        auto plan = detail::plan_grid(p, h, z_bot_req, p.z_max(), opts, ceiling);
        int N = plan.n;
        double z_bot = plan.z_bot;
        auto A = detail::assemble(p, h, z_bot, p.z_max(), N, true);
        auto eig = detail::tridiag_eigs_in(A.d, A.e, floor_e, ceiling);
        if (opts.richardson) {
            auto A2 = detail::assemble(p, h, z_bot, p.z_max(), 2 * N, true);
            auto eig2 = detail::tridiag_eigs_in(A2.d, A2.e, floor_e, ceiling);
            // pair by index from the bottom; extrapolate where both exist
            std::size_t m = std::min(eig.size(), eig2.size());
            std::vector<double> ex(eig2.begin(), eig2.end());
            for (std::size_t i = 0; i < m; ++i) ex[i] = (4.0 * eig2[i] - eig[i]) / 3.0;
            eig = std::move(ex);
        }
        // drop anything that crept above the ceiling after extrapolation
        while (!eig.empty() && eig.back() >= ceiling) eig.pop_back();
        bool stable = (pass > 0 && eig.size() == prev.size());
        if (stable)
            for (std::size_t i = 0; i < eig.size(); ++i)
                if (std::abs(eig[i] - prev[i]) > 1e-9 * mu_I) stable = false;
        if (!eig.empty()) e_top_guess = eig.back();
        if (stable || eig.empty()) {
            out.eigenvalues = std::move(eig);
            return out;
        }
        prev = eig;
        out.eigenvalues = std::move(eig);
    }
    return out;
}

/// [OPERATION] solve_wholeline: same operator on a window with decay closures
/// at both ends; used to test full-well quantization in isolation.
inline SpectralData solve_wholeline(const ProfileModel& p, double h, double e_cap,
                                    SturmOpts opts = {}) {
    if (h <= 0) throw input_error("solve_wholeline: h must be positive");
    const double z_lo = p.z_min(), z_hi = p.z_max();
    const double wall = std::min(p.value(z_lo), p.value(z_hi));
    if (e_cap >= wall)
        throw input_error("solve_wholeline: window boundary inside the allowed region");
    // interior minimum as the spectral floor
    double mn = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 2000; ++i)
        mn = std::min(mn, p.value(z_lo + (z_hi - z_lo) * i / 2000.0));

    int N = opts.grid_n > 0
                ? opts.grid_n
                : [&] {
                      double kmax = std::sqrt(std::max(e_cap / mn - 1.0, 0.25)) / h;
                      double dz_target = 2.0 * pi / kmax / opts.points_per_wavelength;
                      return std::max(200, static_cast<int>(std::ceil((z_hi - z_lo) / dz_target)));
                  }();
    auto A = detail::assemble(p, h, z_lo, z_hi, N, false);
    auto eig = detail::tridiag_eigs_in(A.d, A.e, mn * (1 + 1e-12), e_cap);
    if (opts.richardson) {
        auto A2 = detail::assemble(p, h, z_lo, z_hi, 2 * N, false);
        auto eig2 = detail::tridiag_eigs_in(A2.d, A2.e, mn * (1 + 1e-12), e_cap);
        std::size_t m = std::min(eig.size(), eig2.size());
        std::vector<double> ex(eig2.begin(), eig2.end());
        for (std::size_t i = 0; i < m; ++i) ex[i] = (4.0 * eig2[i] - eig[i]) / 3.0;
        eig = std::move(ex);
    }
    SpectralData out;
    out.h = h;
    out.eigenvalues = std::move(eig);
    out.provenance = "numeric";
    return out;
}

}  // namespace specwell
