#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "specwell/common.hpp"
#include "specwell/interp.hpp"
#include "specwell/model.hpp"
#include "specwell/rootfind.hpp"

namespace specwell {

struct ProfileTolerances {
    double turning_residual_rel = 1e-12;   // |mu(f)-E| <= tol * mu_I
    double nondegeneracy_rel = 1e-8;       // |mu''| >= tol * mu_I / Z_I^2
    double genericity_rel = 1e-9;          // critical values closer than tol*(mu_I-E0) are "equal"
};

/// Sampled profile with C2 cubic interpolation; the on-disk Profile type.
class SampledProfile final : public ProfileModel {
  public:
    SampledProfile(std::vector<double> grid, std::vector<double> mu, double mu_I,
                   bool validate = true)
        : grid_(std::move(grid)), mu_(std::move(mu)), mu_I_(mu_I) {
        if (grid_.size() != mu_.size() || grid_.size() < 4)
            throw input_error("profile: need matching grid/mu with >= 4 samples");
        for (std::size_t i = 1; i < grid_.size(); ++i)
            if (!(grid_[i] > grid_[i - 1])) throw input_error("profile: grid not increasing");
        if (std::abs(grid_.back()) > 1e-12) throw input_error("profile: last grid point must be 0");
        if (grid_.front() >= 0.0) throw input_error("profile: z_min must be negative");
        spline_ = CubicSpline(grid_, mu_);
        if (validate) check_invariants();
    }

    double value(double Z) const override {
        if (Z > grid_.back() + 1e-12) throw input_error("profile: Z > 0");
        if (Z <= grid_.front()) return mu_I_;
        return spline_.eval(Z, 0);
    }
    double deriv(double Z) const override {
        if (Z > grid_.back() + 1e-12) throw input_error("profile: Z > 0");
        if (Z <= grid_.front()) return 0.0;
        return spline_.eval(Z, 1);
    }
    double deriv2(double Z) const override {
        if (Z > grid_.back() + 1e-12) throw input_error("profile: Z > 0");
        if (Z <= grid_.front()) return 0.0;
        return spline_.eval(Z, 2);
    }
    double z_min() const override { return grid_.front(); }
    double z_max() const override { return 0.0; }

    const std::vector<double>& grid() const { return grid_; }
    const std::vector<double>& mu() const { return mu_; }
    double mu_I() const { return mu_I_; }
    bool flat_surface() const { return std::abs(spline_.eval(0.0, 1)) < 1e-8 * mu_I_; }

  private:
    void check_invariants() const {
        double mn = *std::min_element(mu_.begin(), mu_.end());
        double mx = *std::max_element(mu_.begin(), mu_.end());
        if (mn <= 0.0) throw input_error("profile: mu must be positive");
        if (mu_.back() > mn + 1e-10 * mu_I_)
            throw input_error("profile: mu(0) must be the minimum");
        if (std::abs(mu_.front() - mu_I_) > 1e-9 * mu_I_ || mx > mu_I_ * (1.0 + 1e-9))
            throw input_error("profile: mu(Z_I) must equal the maximum mu_I");
    }

    std::vector<double> grid_, mu_;
    double mu_I_;
    CubicSpline spline_;
};

/// Sample an arbitrary model into the on-disk representation.
inline std::unique_ptr<SampledProfile> sample_profile(const ProfileModel& m, std::size_t n = 801,
                                                      bool validate = true) {
    auto grid = linspace(m.z_min(), m.z_max(), n);
    std::vector<double> mu(n);
    for (std::size_t i = 0; i < n; ++i) mu[i] = m.value(grid[i]);
    return std::make_unique<SampledProfile>(std::move(grid), std::move(mu), m.floor_value(),
                                            validate);
}

// ---------------------------------------------------------------------------

/// [OPERATION] evaluate: interpolated mu / mu' / mu''; constant below Z_I.
inline double evaluate(const ProfileModel& p, double Z, int deriv = 0) {
    if (Z > p.z_max() + 1e-12) throw input_error("evaluate: Z above the surface");
    switch (deriv) {
        case 0: return p.value(Z);
        case 1: return p.deriv(Z);
        case 2: return p.deriv2(Z);
        default: throw input_error("evaluate: deriv must be 0, 1 or 2");
    }
}

struct CriticalPoint {
    double z;
    double e;
    double curvature;  // mu''(z)
    enum class Kind { minimum, maximum } kind;
};

struct CriticalStructure {
    std::vector<CriticalPoint> points;  // sorted by critical value e
    double e0 = 0.0;                    // boundary value mu(0)
    double mu_I = 0.0;
    double z_star = 0.0;                // shallowest critical point (Z_I if none)
    bool flat_surface = false;          // mu'(0) == 0 flagged, not an error

    /// Band edges E_0 < E_1 < ... < E_M < E_{M+1} = mu_I.
    std::vector<double> band_edges() const {
        std::vector<double> e{e0};
        for (const auto& c : points) e.push_back(c.e);
        e.push_back(mu_I);
        return e;
    }
};

/// [OPERATION] critical_structure: all interior zeros of mu' with kind and
/// curvature; rejects degenerate or equal critical values.
inline CriticalStructure critical_structure(const ProfileModel& p,
                                            const ProfileTolerances& tol = {},
                                            int scan_points = 4000) {
    CriticalStructure cs;
    cs.e0 = p.value(p.z_max());
    cs.mu_I = p.floor_value();
    cs.flat_surface = std::abs(p.deriv(p.z_max())) < 1e-8 * std::max(cs.mu_I, 1.0);

    const double zi = p.z_min(), zs = p.z_max();
    const double eps = 1e-9 * (zs - zi);
    std::vector<CriticalPoint> pts;
    double x0 = zi + eps, f0 = p.deriv(x0);
    for (int i = 1; i <= scan_points; ++i) {
        double x1 = zi + eps + (zs - eps - (zi + eps)) * static_cast<double>(i) / scan_points;
        double f1 = p.deriv(x1);
        // a node can land exactly on a critical point; treat it as the root
        // once (when it is the right endpoint) and classify by the left sign
        bool flip = f0 != 0.0 && f1 != 0.0 && f0 * f1 < 0.0;
        bool exact = f0 != 0.0 && f1 == 0.0;
        if (flip || exact) {
            double z = exact ? x1 : brent([&](double Z) { return p.deriv(Z); }, x0, x1, 1e-14);
            double c2 = p.deriv2(z);
            CriticalPoint cp{z, p.value(z), c2,
                             f0 < 0.0 ? CriticalPoint::Kind::minimum
                                      : CriticalPoint::Kind::maximum};
            // plateau guard: require an actual extremum, not a flat stretch
            if (std::abs(c2) > 0.0 || flip) pts.push_back(cp);
        }
        x0 = x1;
        f0 = f1;
    }
    const double ndg = tol.nondegeneracy_rel * cs.mu_I / (zi * zi);
    for (const auto& c : pts)
        if (std::abs(c.curvature) < ndg)
            throw numeric_error("critical_structure: degenerate critical point at Z=" +
                                std::to_string(c.z));
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.e < b.e; });
    const double gen = tol.genericity_rel * std::max(cs.mu_I - cs.e0, 1e-30);
    for (std::size_t i = 1; i < pts.size(); ++i)
        if (pts[i].e - pts[i - 1].e < gen)
            throw numeric_error("critical_structure: genericity violation, equal critical values");
    // shallowest critical point = largest z (first zero of mu' going down)
    cs.z_star = zi;
    for (const auto& c : pts) cs.z_star = std::max(cs.z_star, c.z);
    cs.points = std::move(pts);
    return cs;
}

// ---------------------------------------------------------------------------

/// One connected component of {mu < E} separated from the boundary, with
/// flank brackets valid across a whole band (no critical values inside).
struct WellInterval {
    double z_left_top, z_right_top;   // turning depths at the band top
    double z_left_bot, z_right_bot;   // turning depths at the band bottom
                                      // (both equal the vertex for a newborn well)
};

struct HalfWellInterval {
    double z_top, z_bot;  // deep turning depth at band top / bottom
};

struct WellDecomposition {
    int k = 0;
    double e_lo = 0.0, e_hi = 0.0;  // band J_k
    std::vector<WellInterval> wells;
    HalfWellInterval half;
};

namespace detail {

/// All crossings of mu = E inside (z_lo, z_hi), sorted. Scan nodes are
/// densified near the supplied critical depths, where level sets pinch off.
inline std::vector<double> level_crossings(const ProfileModel& p, double E, double z_lo,
                                           double z_hi,
                                           const std::vector<double>& focus = {},
                                           int scan_points = 6000) {
    std::vector<double> nodes = linspace(z_lo, z_hi, scan_points);
    for (double zf : focus) {
        double w = 0.01 * (z_hi - z_lo);
        for (int i = 0; i <= 240; ++i) {
            double z = zf - w + 2.0 * w * i / 240.0;
            if (z > z_lo && z < z_hi) nodes.push_back(z);
        }
    }
    std::sort(nodes.begin(), nodes.end());
    std::vector<double> roots;
    double x0 = nodes[0], f0 = p.value(x0) - E;
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        double x1 = nodes[i], f1 = p.value(x1) - E;
        if (f0 == 0.0) roots.push_back(x0);
        else if (f1 != 0.0 && f0 * f1 < 0.0)
            roots.push_back(brent([&](double Z) { return p.value(Z) - E; }, x0, x1, 1e-15));
        x0 = x1;
        f0 = f1;
    }
    return roots;
}

}  // namespace detail

/// [OPERATION] decompose: the N_k wells and the half well of order k.
inline WellDecomposition decompose(const ProfileModel& p, int k,
                                   const CriticalStructure& cs) {
    auto edges = cs.band_edges();
    if (k < 1 || k > static_cast<int>(edges.size()) - 1)
        throw input_error("decompose: band index out of range");
    WellDecomposition d;
    d.k = k;
    d.e_lo = edges[k - 1];
    d.e_hi = edges[k];
    if (!(d.e_hi > d.e_lo)) throw input_error("decompose: empty band");

    const double margin = 5e-4 * (d.e_hi - d.e_lo);
    const double e_top = d.e_hi - margin;
    const double e_bot = d.e_lo + margin;
    std::vector<double> focus;
    for (const auto& c : cs.points) focus.push_back(c.z);

    auto top = detail::level_crossings(p, e_top, p.z_min(), p.z_max(), focus);
    auto bot = detail::level_crossings(p, e_bot, p.z_min(), p.z_max(), focus);
    if (top.empty()) throw numeric_error("decompose: no classically allowed region in band");
    if (top.size() % 2 == 0) {
        // even number of crossings means the last interval does not reach the
        // boundary, which contradicts mu(0) being the minimum
        throw numeric_error("decompose: inconsistent level-set topology");
    }
    // intervals where mu < E: (top[0], top[1]), (top[2], top[3]), ..., (top.back(), 0)
    std::vector<std::pair<double, double>> wells_top;
    for (std::size_t i = 0; i + 1 < top.size(); i += 2) wells_top.push_back({top[i], top[i + 1]});
    double half_top = top.back();

    std::vector<std::pair<double, double>> wells_bot;
    for (std::size_t i = 0; i + 1 < bot.size(); i += 2) wells_bot.push_back({bot[i], bot[i + 1]});
    double half_bot = bot.back();

    for (auto [lo, hi] : wells_top) {
        WellInterval w;
        w.z_left_top = lo;
        w.z_right_top = hi;
        // find the matching bottom interval (contained in [lo,hi]); a newborn
        // well has none and collapses to its vertex
        w.z_left_bot = w.z_right_bot = std::numeric_limits<double>::quiet_NaN();
        for (auto [blo, bhi] : wells_bot)
            if (blo >= lo - 1e-12 && bhi <= hi + 1e-12) {
                w.z_left_bot = blo;
                w.z_right_bot = bhi;
                break;
            }
        if (std::isnan(w.z_left_bot)) {
            // vertex = the interior minimum inside (lo,hi)
            double vz = 0.5 * (lo + hi), ve = p.value(vz);
            for (const auto& c : cs.points)
                if (c.kind == CriticalPoint::Kind::minimum && c.z > lo && c.z < hi &&
                    c.e < ve) {
                    vz = c.z;
                    ve = c.e;
                }
            w.z_left_bot = w.z_right_bot = vz;
        }
        d.wells.push_back(w);
    }
    d.half.z_top = half_top;
    d.half.z_bot = half_bot;
    return d;
}

inline WellDecomposition decompose(const ProfileModel& p, int k) {
    return decompose(p, k, critical_structure(p));
}

}  // namespace specwell
