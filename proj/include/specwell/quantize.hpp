#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <vector>

#include "specwell/actions.hpp"
#include "specwell/interp.hpp"
#include "specwell/model.hpp"
#include "specwell/profile.hpp"
#include "specwell/rootfind.hpp"
#include "specwell/sturm.hpp"

namespace specwell {

struct BsOpts {
    int order = 2;                 // 0: leading + Maslov, 2: include the h^2 term
    double edge_margin_rel = 0.0;  // extra margin on top of the table's own
};

namespace detail {

/// Solve S(E) = 2 pi h alpha for every integer alpha. The h^2 S2 term is an
/// asymptotic correction that blows up at band edges, so the search is
/// restricted to the window where it stays a fraction of a level spacing and
/// the rule is monotone; solutions outside are dropped (edge-margin rule).
template <class SFun, class S2Fun>
void bs_roots(const SFun& S, const S2Fun& s2_term, double e_lo, double e_hi, double h,
              int well_label, SpectralData& out) {
    const int n_scan = 600;
    const double cap = 0.75 * pi * h;  // max admissible |h^2 S2| level shift
    std::vector<double> Es = linspace(e_lo, e_hi, n_scan);
    int i_lo = 0, i_hi = n_scan - 1;
    while (i_lo < n_scan && std::abs(s2_term(Es[i_lo])) > cap) ++i_lo;
    while (i_hi > i_lo && std::abs(s2_term(Es[i_hi])) > cap) --i_hi;
    if (i_hi - i_lo < 3) return;
    // longest increasing run of S inside the window
    std::vector<double> Sv(i_hi - i_lo + 1);
    for (int i = i_lo; i <= i_hi; ++i) Sv[i - i_lo] = S(Es[i]);
    int best_a = 0, best_b = 0, run_a = 0;
    for (int i = 1; i < static_cast<int>(Sv.size()); ++i) {
        if (Sv[i] > Sv[i - 1]) {
            if (i - run_a > best_b - best_a) {
                best_a = run_a;
                best_b = i;
            }
        } else {
            run_a = i;
        }
    }
    if (best_b - best_a < 3) return;
    double w_lo = Es[i_lo + best_a], w_hi = Es[i_lo + best_b];
    double s_lo = Sv[best_a], s_hi = Sv[best_b];
    int a_min = std::max(1, static_cast<int>(std::ceil(s_lo / (2 * pi * h))));
    int a_max = static_cast<int>(std::floor(s_hi / (2 * pi * h)));
    for (int alpha = a_min; alpha <= a_max; ++alpha) {
        double target = 2 * pi * h * alpha;
        double lo, hi;
        if (!scan_bracket([&](double E) { return S(E) - target; }, w_lo, w_hi, 300, lo, hi))
            continue;
        double root = (lo == hi) ? lo : brent([&](double E) { return S(E) - target; }, lo, hi,
                                              1e-14);
        out.eigenvalues.push_back(root);
        out.labels.push_back(well_label);
        out.alphas.push_back(alpha);
    }
}

}  // namespace detail

/// [OPERATION] bs_spectrum_full: E with S0(E) + h pi + h^2 S2(E) = 2 pi h alpha.
inline SpectralData bs_spectrum_full(const ActionTable& t, double h, BsOpts opts = {},
                                     int well_label = 1) {
    if (t.half) throw input_error("bs_spectrum_full: table is for a half well");
    SpectralData out;
    out.h = h;
    out.provenance = "bohr-sommerfeld";
    Pchip s0(t.E, t.S0);
    std::optional<Pchip> s2;
    if (opts.order >= 2) {
        if (!t.has_s2()) throw input_error("bs_spectrum_full: order 2 needs S2 in the table");
        s2.emplace(t.E, t.S2);
    }
    auto S = [&](double E) {
        double v = s0(E) + h * pi;
        if (s2) v += h * h * (*s2)(E);
        return v;
    };
    auto s2_term = [&](double E) { return s2 ? h * h * (*s2)(E) : 0.0; };
    double m = opts.edge_margin_rel * (t.band_hi - t.band_lo);
    detail::bs_roots(S, s2_term, t.band_lo + m, t.band_hi - m, h, well_label, out);
    return out;
}

/// [OPERATION] bs_spectrum_half: E with S~(E) = (1/2)S~0 + (3/2) h pi
/// + (1/2) h^2 S~2 = 2 pi h alpha; equivalent to the (alpha - 3/4) offset.
inline SpectralData bs_spectrum_half(const ActionTable& t, double h, BsOpts opts = {},
                                     int well_label = 0) {
    if (!t.half) throw input_error("bs_spectrum_half: table is for a separated well");
    SpectralData out;
    out.h = h;
    out.provenance = "bohr-sommerfeld";
    Pchip s0(t.E, t.S0);
    std::optional<Pchip> s2;
    if (opts.order >= 2) {
        if (!t.has_s2()) throw input_error("bs_spectrum_half: order 2 needs S2 in the table");
        s2.emplace(t.E, t.S2);
    }
    auto S = [&](double E) {
        double v = 0.5 * s0(E) + 1.5 * pi * h;
        if (s2) v += 0.5 * h * h * (*s2)(E);
        return v;
    };
    auto s2_term = [&](double E) { return s2 ? 0.5 * h * h * (*s2)(E) : 0.0; };
    double m = opts.edge_margin_rel * (t.band_hi - t.band_lo);
    detail::bs_roots(S, s2_term, t.band_lo + m, t.band_hi - m, h, well_label, out);
    return out;
}

struct SemiclassicalOpts {
    BsOpts bs;
    ActionTableOpts table;
    double top_margin_rel = 0.02;        // stay below mu_I by this fraction of the range
    double collision_scale = 1e-3;       // predictions closer than this * h^2 warn
};

struct SemiclassicalResult {
    SpectralData spectrum;               // sorted union, labels = 100*k + j (half: j=0)
    std::vector<ActionTable> tables;
    int collision_warnings = 0;
};

/// [OPERATION] semiclassical_spectrum: union over all bands of the per-well
/// Bohr-Sommerfeld ladders.
inline SemiclassicalResult semiclassical_spectrum(const ProfileModel& p, double h,
                                                  SemiclassicalOpts opts = {}) {
    SemiclassicalResult res;
    res.spectrum.h = h;
    res.spectrum.provenance = "bohr-sommerfeld";
    auto cs = critical_structure(p);
    auto edges = cs.band_edges();
    const double cap = cs.mu_I - opts.top_margin_rel * (cs.mu_I - cs.e0);

    struct Entry {
        double e;
        int label, alpha;
    };
    std::vector<Entry> all;
    for (int k = 1; k < static_cast<int>(edges.size()); ++k) {
        double lo = edges[k - 1], hi = std::min(edges[k], cap);
        if (hi <= lo) continue;
        auto dec = decompose(p, k, cs);
        for (std::size_t j = 0; j < dec.wells.size(); ++j) {
            auto t = build_action_table_full(p, dec.wells[j], k, static_cast<int>(j) + 1, lo, hi,
                                             opts.table);
            auto s = bs_spectrum_full(t, h, opts.bs, 100 * k + static_cast<int>(j) + 1);
            for (std::size_t i = 0; i < s.eigenvalues.size(); ++i)
                all.push_back({s.eigenvalues[i], s.labels[i], s.alphas[i]});
            res.tables.push_back(std::move(t));
        }
        auto th = build_action_table_half(p, dec.half, k, 0, lo, hi, opts.table);
        auto sh = bs_spectrum_half(th, h, opts.bs, 100 * k);
        for (std::size_t i = 0; i < sh.eigenvalues.size(); ++i)
            all.push_back({sh.eigenvalues[i], sh.labels[i], sh.alphas[i]});
        res.tables.push_back(std::move(th));
    }
    std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.e < b.e; });
    for (std::size_t i = 1; i < all.size(); ++i)
        if (all[i].label != all[i - 1].label &&
            all[i].e - all[i - 1].e < opts.collision_scale * h * h)
            ++res.collision_warnings;
    for (const auto& e : all) {
        res.spectrum.eigenvalues.push_back(e.e);
        res.spectrum.labels.push_back(e.label);
        res.spectrum.alphas.push_back(e.alpha);
    }
    return res;
}

/// [OPERATION] first_eigenvalue_rate: least-squares exponent of
/// lambda_1 - E0 against h.
inline double first_eigenvalue_rate(const ProfileModel& p, const std::vector<double>& hs,
                                    SturmOpts sturm = {}) {
    if (hs.size() < 3) throw input_error("first_eigenvalue_rate: need at least 3 h values");
    const double e0 = p.surface_value();
    std::vector<double> lx, ly;
    for (double h : hs) {
        auto s = solve_halfline(p, h, sturm);
        if (s.eigenvalues.empty())
            throw numeric_error("first_eigenvalue_rate: no eigenvalues at h=" + std::to_string(h));
        lx.push_back(std::log(h));
        ly.push_back(std::log(s.eigenvalues.front() - e0));
    }
    return linear_fit(lx, ly).second;
}

// ---------------------------------------------------------------------------
// Trace-formula identity check
// ---------------------------------------------------------------------------

struct TraceCheckResult {
    double lhs = 0.0;
    double rhs = 0.0;
    double residual = 0.0;  // |lhs - rhs| / |lhs|
    std::vector<std::pair<int, double>> partial;  // (m_max used, rhs so far)
};

/// Smooth compactly supported bump on (c-w, c+w), equal to 1 at the center.
inline std::function<double(double)> bump_function(double c, double w) {
    return [c, w](double E) {
        double x = (E - c) / w;
        if (std::abs(x) >= 1.0) return 0.0;
        return std::exp(1.0 - 1.0 / (1.0 - x * x));
    };
}

/// [OPERATION] trace_check: compares the sum of phi over the band's predicted
/// spectrum with the oscillatory side of the trace formula truncated at m_max.
inline TraceCheckResult trace_check(const std::vector<ActionTable>& tables, double h, int m_max,
                                    const std::function<double(double)>& phi,
                                    double support_lo, double support_hi,
                                    int min_pts_per_osc = 8) {
    if (m_max < 1) throw input_error("trace_check: m_max must be >= 1");
    TraceCheckResult res;

    // lhs over the predicted spectrum of every table
    for (const auto& t : tables) {
        SpectralData s = t.half ? bs_spectrum_half(t, h) : bs_spectrum_full(t, h);
        for (double e : s.eigenvalues) res.lhs += phi(e);
    }

    // rhs: sum over wells and |m| <= m_max, ascending in |m| for the partials
    using cplx = std::complex<double>;
    std::vector<double> rhs_by_m(m_max + 1, 0.0);
    for (const auto& t : tables) {
        Pchip s0(t.E, t.S0);
        Pchip s2(t.E, t.has_s2() ? t.S2 : std::vector<double>(t.E.size(), 0.0));
        Pchip Tt(t.E, t.T);
        double lo = std::max(support_lo, t.band_lo), hi = std::min(support_hi, t.band_hi);
        if (hi <= lo) continue;
        double s0_range = std::abs(s0(hi) - s0(lo));
        for (int m = 0; m <= m_max; ++m) {
            // amplitude and phase per the boundary trace formula
            double osc = (t.half ? 0.5 : 1.0) * m * s0_range / (2 * pi * h);
            int n = std::max(256, static_cast<int>(std::ceil(min_pts_per_osc * (osc + 1))));
            if (n % 2) ++n;
            double sum_contrib = 0.0;
            double dx = (hi - lo) / n;
            auto term = [&](double E) -> double {
                // half-well amplitude is (1/2) dS~0/dE = the loop time, which
                // is what period_half tabulates
                double T = Tt(E);
                double S2v = t.half ? 0.5 * s2(E) : s2(E);
                double phase = (t.half ? 0.5 : 1.0) * m * s0(E) / h +
                               (t.half ? 1.5 : 1.0) * m * pi;
                cplx amp = cplx(1.0, m * h * S2v) * T;
                cplx val = std::exp(cplx(0.0, phase)) * amp;
                double re = val.real();
                if (m > 0) re *= 2.0;  // +m and -m are conjugates
                return re * phi(E) / (2 * pi * h);
            };
            // composite Simpson
            double acc = term(lo) + term(hi);
            for (int i = 1; i < n; ++i) acc += term(lo + i * dx) * (i % 2 ? 4.0 : 2.0);
            sum_contrib = acc * dx / 3.0;
            rhs_by_m[m] += sum_contrib;
        }
    }
    double run = 0.0;
    for (int m = 0; m <= m_max; ++m) {
        run += rhs_by_m[m];
        res.partial.push_back({m, run});
    }
    res.rhs = run;
    res.residual = std::abs(res.lhs - res.rhs) / std::max(std::abs(res.lhs), 1e-300);
    return res;
}

}  // namespace specwell
