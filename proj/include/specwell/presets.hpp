#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <string>

#include "specwell/model.hpp"

namespace specwell {
namespace presets {

inline double smoothstep5(double x) {
    x = std::clamp(x, 0.0, 1.0);
    return x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
}
inline double smoothstep5_d(double x) {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    return 30.0 * x * x * (1.0 + x * (-2.0 + x));
}
inline double smoothstep5_d2(double x) {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    return 60.0 * x * (1.0 + x * (-3.0 + 2.0 * x));
}

/// mu = 1 - Z on [-1, 0]; mu(0)=1, mu_I=2, mu'(0) = -1.
inline std::unique_ptr<ProfileModel> monotone() {
    return std::make_unique<AnalyticProfile>(
        [](double Z) { return 1.0 - Z; }, [](double) { return -1.0; },
        [](double) { return 0.0; }, -1.0);
}

/// mu = 1 + Z^2 on [-1, 0]; mu'(0) = 0 (flat start), mu_I = 2.
inline std::unique_ptr<ProfileModel> flat_start() {
    return std::make_unique<AnalyticProfile>(
        [](double Z) { return 1.0 + Z * Z; }, [](double Z) { return 2.0 * Z; },
        [](double) { return 2.0; }, -1.0);
}

inline std::unique_ptr<ProfileModel> layer(double m1 = 1.0, double m2 = 4.0, double H = 1.0) {
    return std::make_unique<LayerProfile>(m1, m2, H);
}

/// Constant mu (no well at all; the forward solver returns an empty spectrum).
inline std::unique_ptr<ProfileModel> constant(double c = 2.0) {
    return std::make_unique<AnalyticProfile>(
        [c](double) { return c; }, [](double) { return 0.0; }, [](double) { return 0.0; },
        -1.0);
}

// Narrow Gaussian well at Z1=-2 blended into a linear near-surface decrease.
// The well period stays well below the half-well period across the band
// (weak transversality holds with margin). Interior structure: min at Z=-2
// (E=1.2, mu''=12.8), barrier max near Z=-1.4455 (E about 1.90188);
// mu(0)=1, mu'(0)=-0.46, Z_I=-4.
struct SingleWellParts {
    static double g(double Z) { return 2.0 - 0.8 * std::exp(-8.0 * (Z + 2.0) * (Z + 2.0)); }
    static double dg(double Z) {
        double u = Z + 2.0;
        return 12.8 * u * std::exp(-8.0 * u * u);
    }
    static double d2g(double Z) {
        double u = Z + 2.0;
        return 12.8 * (1.0 - 16.0 * u * u) * std::exp(-8.0 * u * u);
    }
    static double p(double Z) { return 1.0 - 0.46 * Z; }
    static constexpr double a = -1.6, b = -1.0;
};

inline std::unique_ptr<ProfileModel> single_well() {
    using P = SingleWellParts;
    auto f = [](double Z) {
        double s = smoothstep5((Z - P::a) / (P::b - P::a));
        return (1.0 - s) * P::g(Z) + s * P::p(Z);
    };
    auto df = [](double Z) {
        double w = P::b - P::a, x = (Z - P::a) / w;
        double s = smoothstep5(x), ds = smoothstep5_d(x) / w;
        return (1.0 - s) * P::dg(Z) + s * (-0.46) + ds * (P::p(Z) - P::g(Z));
    };
    auto d2f = [](double Z) {
        double w = P::b - P::a, x = (Z - P::a) / w;
        double s = smoothstep5(x), ds = smoothstep5_d(x) / w, d2s = smoothstep5_d2(x) / (w * w);
        return (1.0 - s) * P::d2g(Z) + 2.0 * ds * (-0.46 - P::dg(Z)) +
               d2s * (P::p(Z) - P::g(Z));
    };
    return std::make_unique<AnalyticProfile>(f, df, d2f, -4.0);
}

// Two Gaussian wells with contrasting curvature plus the surface blend.
// Critical structure (numerically): min A (-4.7774, 1.14350), min B
// (-2.6000, 1.38000), joining max (-3.9279, 1.68741), surface barrier
// (-1.1670, 1.76495); Z_I=-7.
struct TwoWellParts {
    static double g(double Z) {
        return 2.0 - 0.80 * std::exp(-3.5 * (Z + 4.8) * (Z + 4.8)) -
               0.62 * std::exp(-0.5 * (Z + 2.6) * (Z + 2.6));
    }
    static double dg(double Z) {
        double u = Z + 4.8, v = Z + 2.6;
        return 5.6 * u * std::exp(-3.5 * u * u) + 0.62 * v * std::exp(-0.5 * v * v);
    }
    static double d2g(double Z) {
        double u = Z + 4.8, v = Z + 2.6;
        return 5.6 * (1.0 - 7.0 * u * u) * std::exp(-3.5 * u * u) +
               0.62 * (1.0 - v * v) * std::exp(-0.5 * v * v);
    }
    static double p(double Z) { return 1.0 - 0.52 * Z; }
    static constexpr double a = -1.3, b = -0.7;
};

inline std::unique_ptr<ProfileModel> two_well() {
    using P = TwoWellParts;
    auto f = [](double Z) {
        double s = smoothstep5((Z - P::a) / (P::b - P::a));
        return (1.0 - s) * P::g(Z) + s * P::p(Z);
    };
    auto df = [](double Z) {
        double w = P::b - P::a, x = (Z - P::a) / w;
        double s = smoothstep5(x), ds = smoothstep5_d(x) / w;
        return (1.0 - s) * P::dg(Z) + s * (-0.52) + ds * (P::p(Z) - P::g(Z));
    };
    auto d2f = [](double Z) {
        double w = P::b - P::a, x = (Z - P::a) / w;
        double s = smoothstep5(x), ds = smoothstep5_d(x) / w, d2s = smoothstep5_d2(x) / (w * w);
        return (1.0 - s) * P::d2g(Z) + 2.0 * ds * (-0.52 - P::dg(Z)) +
               d2s * (P::p(Z) - P::g(Z));
    };
    return std::make_unique<AnalyticProfile>(f, df, d2f, -7.0);
}

// Exactly even interior well: mu = E1 + 0.8 s(|Z-Z1|), s(x) = x^2 (2 - x^2),
// with Z1=-2.5, so the rim meets mu_I=2 at Z_I=-3.5 and Z2=-1.5; a monotone
// quintic joins (Z2, 2) to the surface (0, 1). Discriminant in the
// reconstruction vanishes identically on (E1, mu_I).
struct SymmetricWellParts {
    static constexpr double Z1 = -2.5, wdt = 1.0, E1 = 1.2, top = 2.0;
    // quintic Hermite on [-1.5, 0]: H(-1.5)=2, H'(-1.5)=0, H''(-1.5)=-6.4,
    // H(0)=1, H'(0)=-0.3, H''(0)=0
    static double hermite(double Z, int d) {
        double t = (Z + 1.5) / 1.5;  // in [0,1]
        // coefficients of H in t solved from the 6 conditions
        static const double c[6] = {2.0, 0.0, -7.2, 13.4, -9.75, 2.55};
        double L = 1.5;
        if (d == 0) {
            double v = 0;
            for (int j = 5; j >= 0; --j) v = v * t + c[j];
            return v;
        }
        if (d == 1) {
            double v = 0;
            for (int j = 5; j >= 1; --j) v = v * t + j * c[j];
            return v / L;
        }
        double v = 0;
        for (int j = 5; j >= 2; --j) v = v * t + j * (j - 1) * c[j];
        return v / (L * L);
    }
};

inline std::unique_ptr<ProfileModel> symmetric_well() {
    using P = SymmetricWellParts;
    auto f = [](double Z) {
        if (Z > -1.5) return P::hermite(Z, 0);
        double x = std::abs(Z - P::Z1) / P::wdt;
        double s = x * x * (2.0 - x * x);
        return P::E1 + 0.8 * s;
    };
    auto df = [](double Z) {
        if (Z > -1.5) return P::hermite(Z, 1);
        double x = std::abs(Z - P::Z1) / P::wdt;
        double sx = 4.0 * x * (1.0 - x * x);
        return 0.8 * sx * sgn(Z - P::Z1) / P::wdt;
    };
    auto d2f = [](double Z) {
        if (Z > -1.5) return P::hermite(Z, 2);
        double x = std::abs(Z - P::Z1) / P::wdt;
        return 0.8 * (4.0 - 12.0 * x * x) / (P::wdt * P::wdt);
    };
    return std::make_unique<AnalyticProfile>(f, df, d2f, -3.5);
}

/// Whole-line quadratic well mu = 1 + (Z+2)^2 windowed on [zlo, zhi].
inline std::unique_ptr<ProfileModel> quadratic_well(double zlo = -4.0, double zhi = 0.0) {
    return std::make_unique<AnalyticProfile>(
        [](double Z) { return 1.0 + (Z + 2.0) * (Z + 2.0); },
        [](double Z) { return 2.0 * (Z + 2.0); }, [](double) { return 2.0; }, zlo, zhi);
}

inline std::unique_ptr<ProfileModel> make(const std::string& name,
                                          const std::map<std::string, double>& params = {}) {
    auto get = [&](const std::string& key, double dflt) {
        auto it = params.find(key);
        return it == params.end() ? dflt : it->second;
    };
    if (name == "monotone") return monotone();
    if (name == "flat-start") return flat_start();
    if (name == "layer")
        return layer(get("m1", 1.0), get("m2", 4.0), get("H", 1.0));
    if (name == "constant") return constant(get("c", 2.0));
    if (name == "single-well") return single_well();
    if (name == "two-well") return two_well();
    if (name == "symmetric-well") return symmetric_well();
    throw input_error("unknown preset: " + name);
}

}  // namespace presets
}  // namespace specwell
