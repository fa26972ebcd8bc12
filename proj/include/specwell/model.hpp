#pragma once

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "specwell/common.hpp"
#include "specwell/interp.hpp"
#include "specwell/quadrature.hpp"

namespace specwell {

/// A wavespeed-squared profile on [z_min, z_max] with constant extension
/// below z_min. Everything downstream (eigensolvers, actions, inversion)
/// works against this interface so sampled profiles, analytic presets and
/// window models are interchangeable.
class ProfileModel {
  public:
    virtual ~ProfileModel() = default;

    virtual double value(double Z) const = 0;
    virtual double deriv(double Z) const = 0;
    virtual double deriv2(double Z) const = 0;
    virtual double z_min() const = 0;
    virtual double z_max() const { return 0.0; }

    /// Interior discontinuity locations (e.g. the layer interface).
    virtual std::vector<double> jump_points() const { return {}; }

    /// Harmonic average of mu over a grid cell; this is the flux coefficient
    /// that keeps the finite-difference scheme second order across jumps.
    virtual double harmonic_mean(double a, double b) const {
        auto inv = [this](double Z) { return 1.0 / value(Z); };
        return 1.0 / (gauss(inv, a, b, 8) / (b - a));
    }

    /// Plain average over a cell (the potential term wants cell averages so
    /// that an interface sitting on a node stays second order).
    virtual double mean(double a, double b) const {
        auto v = [this](double Z) { return value(Z); };
        return gauss(v, a, b, 8) / (b - a);
    }

    double operator()(double Z) const { return value(Z); }
    double surface_value() const { return value(z_max()); }
    double floor_value() const { return value(z_min()); }
};

/// Profile defined by closures; presets use this so tests can rely on exact
/// derivatives.
class AnalyticProfile final : public ProfileModel {
  public:
    using Fn = std::function<double(double)>;

    AnalyticProfile(Fn f, Fn df, Fn d2f, double zmin, double zmax = 0.0)
        : f_(std::move(f)), df_(std::move(df)), d2f_(std::move(d2f)), zmin_(zmin), zmax_(zmax) {}

    double value(double Z) const override { return Z <= zmin_ ? f_(zmin_) : f_(Z); }
    double deriv(double Z) const override { return Z <= zmin_ ? 0.0 : df_(Z); }
    double deriv2(double Z) const override { return Z <= zmin_ ? 0.0 : d2f_(Z); }
    double z_min() const override { return zmin_; }
    double z_max() const override { return zmax_; }

  private:
    Fn f_, df_, d2f_;
    double zmin_, zmax_;
};

/// Piecewise-constant layer over a half space: mu = m1 on (-H, 0], m2 below.
class LayerProfile final : public ProfileModel {
  public:
    LayerProfile(double m1, double m2, double H) : m1_(m1), m2_(m2), H_(H) {
        if (m1 <= 0 || m2 <= m1 || H <= 0) throw input_error("layer: need 0 < m1 < m2, H > 0");
    }

    double value(double Z) const override { return Z > -H_ ? m1_ : m2_; }
    double deriv(double) const override { return 0.0; }
    double deriv2(double) const override { return 0.0; }
    double z_min() const override { return -H_; }
    std::vector<double> jump_points() const override { return {-H_}; }

    double harmonic_mean(double a, double b) const override {
        if (b <= -H_) return m2_;
        if (a >= -H_) return m1_;
        double frac1 = (b - (-H_)) / (b - a);
        return 1.0 / (frac1 / m1_ + (1.0 - frac1) / m2_);
    }

    double mean(double a, double b) const override {
        if (b <= -H_) return m2_;
        if (a >= -H_) return m1_;
        double frac1 = (b - (-H_)) / (b - a);
        return frac1 * m1_ + (1.0 - frac1) * m2_;
    }

    double m1() const { return m1_; }
    double m2() const { return m2_; }
    double H() const { return H_; }

  private:
    double m1_, m2_, H_;
};

}  // namespace specwell
