#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <cstdio>
#include <string>
#include <vector>

#include "specwell/actions.hpp"
#include "specwell/interp.hpp"
#include "specwell/profile.hpp"
#include "specwell/quantize.hpp"
#include "specwell/sturm.hpp"
#include "specwell/transforms.hpp"

namespace specwell {

// ===========================================================================
// Cluster separation
// ===========================================================================

struct LadderContext {
    double spacing = 0.0;          // expected spacing at the band bottom
    double first_expected = 0.0;   // predicted first member (or band_lo + spacing/2)
    std::function<double(double)> spacing_at;  // optional spacing model over E
};

struct SeparationResult {
    std::vector<std::vector<double>> ladders;  // per expected ladder, ascending
    std::vector<int> labels;                   // per input eigenvalue
    std::vector<std::size_t> deferred;         // indices decided by interpolation
};

struct SeparateOpts {
    double defer_margin = 0.28;  // ambiguity threshold in units of local spacing
};

/// [OPERATION] separate_clusters: partition band eigenvalues into ladders.
/// Per-ladder spacing curves are tracked through windowed periodograms seeded
/// by the contexts, then a greedy pass assigns members against those fixed
/// models; ambiguous points near period coincidences are deferred and filled
/// in from both sides.
inline SeparationResult separate_clusters(const std::vector<double>& eigs, double band_lo,
                                          double band_hi, double h,
                                          std::vector<LadderContext> ctx,
                                          SeparateOpts opts = {}) {
    const int L = static_cast<int>(ctx.size());
    SeparationResult res;
    res.ladders.resize(L);
    res.labels.assign(eigs.size(), -1);
    if (L == 0) throw input_error("separate_clusters: need at least one ladder");
    if (!(band_hi > band_lo)) throw input_error("separate_clusters: empty band");
    if (L == 1) {
        res.ladders[0] = eigs;
        std::fill(res.labels.begin(), res.labels.end(), 0);
        return res;
    }
    const int n = static_cast<int>(eigs.size());

    // --- spacing models from windowed periodograms ---
    // Each ladder's period curve is tracked window to window: candidate peaks
    // of P(T) = |sum w_j exp(i eps_j T/h)|^2 are matched against a linear
    // trend prediction per track, which carries ladder identity through
    // period crossings (where the peaks temporarily merge).
    std::vector<std::vector<double>> model_E(L), model_T(L);
    {
        const int M = std::min(std::max(20, 9 * L), std::max(n, 1));
        std::vector<double> t_cur(L), t_trend(L, 0.0);
        for (int l = 0; l < L; ++l) t_cur[l] = 2.0 * pi * h / ctx[l].spacing;
        bool first_window = true;
        for (int j0 = 0; j0 + M <= n; j0 += std::max(M / 3, 1)) {
            double e_mid = 0.5 * (eigs[j0] + eigs[j0 + M - 1]);
            double width = eigs[j0 + M - 1] - eigs[j0];
            double resolution = 2.0 * pi * h / std::max(width, 1e-12);
            auto power = [&](double T) {
                double re = 0, im = 0;
                for (int q = 0; q < M; ++q) {
                    double w = 0.5 - 0.5 * std::cos(2.0 * pi * (q + 0.5) / M);
                    double ph = eigs[j0 + q] * T / h;
                    re += w * std::cos(ph);
                    im += w * std::sin(ph);
                }
                return re * re + im * im;
            };
            double t_min = 1e300, t_max = 0;
            for (double t : t_cur) {
                t_min = std::min(t_min, t);
                t_max = std::max(t_max, t);
            }
            double g_lo = (first_window ? 0.55 : 0.7) * t_min;
            double g_hi = (first_window ? 1.65 : 1.4) * t_max;
            const int ng = 360;
            std::vector<double> Ts(ng + 1), Ps(ng + 1);
            for (int q = 0; q <= ng; ++q) {
                Ts[q] = g_lo + (g_hi - g_lo) * q / ng;
                Ps[q] = power(Ts[q]);
            }
            struct Peak {
                double t, p;
            };
            std::vector<Peak> peaks;
            for (int q = 1; q < ng; ++q)
                if (Ps[q] > Ps[q - 1] && Ps[q] >= Ps[q + 1]) peaks.push_back({Ts[q], Ps[q]});
            std::sort(peaks.begin(), peaks.end(),
                      [](const Peak& a, const Peak& b) { return a.p > b.p; });
            std::vector<Peak> cand;
            for (const auto& pk : peaks) {
                bool clash = false;
                for (const auto& c : cand)
                    if (std::abs(pk.t - c.t) < std::max(0.6 * resolution, 0.08 * c.t))
                        clash = true;
                if (!clash) cand.push_back(pk);
                if (static_cast<int>(cand.size()) >= L + 2) break;
            }
            if (first_window && static_cast<int>(cand.size()) >= L) {
                // best injective seed -> candidate assignment
                std::vector<int> best_pick;
                double best_cost = 1e300;
                std::vector<int> sel(L);
                std::function<void(int, unsigned)> rec = [&](int l, unsigned used) {
                    if (l == L) {
                        double cost = 0;
                        for (int q = 0; q < L; ++q)
                            cost += std::abs(std::log(cand[sel[q]].t / t_cur[q]));
                        if (cost < best_cost) {
                            best_cost = cost;
                            best_pick = sel;
                        }
                        return;
                    }
                    for (std::size_t cd = 0; cd < cand.size(); ++cd)
                        if (!(used >> cd & 1u)) {
                            sel[l] = static_cast<int>(cd);
                            rec(l + 1, used | (1u << cd));
                        }
                };
                rec(0, 0u);
                if (!best_pick.empty() && best_cost < 0.4 * L)
                    for (int l = 0; l < L; ++l) t_cur[l] = cand[best_pick[l]].t;
                first_window = false;
            } else {
                // track: nearest candidate to the trend prediction, coasting
                // when nothing plausible shows up
                for (int l = 0; l < L; ++l) {
                    double pred = t_cur[l] + t_trend[l];
                    double best_d = 1e300, best_t = pred;
                    for (const auto& c : cand)
                        if (std::abs(c.t - pred) < best_d) {
                            best_d = std::abs(c.t - pred);
                            best_t = c.t;
                        }
                    double tol = std::max(0.22 * pred, 2.0 * resolution);
                    double t_new = (best_d < tol) ? best_t : pred;
                    double step = std::clamp(t_new - t_cur[l], -0.25 * t_cur[l],
                                             0.25 * t_cur[l]);
                    t_trend[l] = std::clamp(0.55 * t_trend[l] + 0.45 * step,
                                            -0.2 * t_cur[l], 0.2 * t_cur[l]);
                    t_cur[l] = t_cur[l] + step;
                }
            }
            for (int l = 0; l < L; ++l) {
                model_E[l].push_back(e_mid);
                model_T[l].push_back(t_cur[l]);
            }
        }
    }
    std::vector<std::function<double(double)>> spacing_model(L);
    std::vector<std::shared_ptr<Pchip>> keep_alive(L);
    for (int l = 0; l < L; ++l) {
        if (model_E[l].size() >= 4) {
            auto interp = std::make_shared<Pchip>(model_E[l], model_T[l]);
            keep_alive[l] = interp;
            double e_min = model_E[l].front(), e_max = model_E[l].back();
            spacing_model[l] = [interp, e_min, e_max, h](double E) {
                double T = interp->eval(std::clamp(E, e_min, e_max), 0);
                return 2.0 * pi * h / std::max(T, 1e-12);
            };
        } else {
            double sp = ctx[l].spacing;
            spacing_model[l] = [sp](double) { return sp; };
        }
    }

    // --- cold start: exhaustive labeling of the first few members ---
    // Greedy from scratch is ambiguous when ladders interleave from the very
    // bottom; score every labeling of a short prefix against the models.
    struct Track {
        double last = 0.0;
        bool started = false;
    };
    std::vector<Track> tr(L);
    const int K0 = std::min<int>(n, 2 * L + 4);
    {
        std::vector<int> lab(K0, 0), best_lab;
        double best_score = std::numeric_limits<double>::infinity();
        while (true) {
            double score = 0.0;
            for (int l = 0; l < L; ++l) {
                std::vector<double> mem;
                for (int i = 0; i < K0; ++i)
                    if (lab[i] == l) mem.push_back(eigs[i]);
                if (mem.empty()) {
                    score += 0.8;
                    continue;
                }
                double sp0 = spacing_model[l](mem.front());
                if (ctx[l].first_expected > 0)
                    score += 0.5 * std::abs(mem.front() - ctx[l].first_expected) / sp0;
                else if (mem.front() - band_lo > 1.3 * sp0)
                    score += 0.4 * (mem.front() - band_lo) / sp0;
                if (mem.size() == 1) score += 0.3;
                for (std::size_t i = 1; i < mem.size(); ++i) {
                    double sp = spacing_model[l](mem[i - 1]);
                    score += std::abs(mem[i] - mem[i - 1] - sp) / sp;
                }
            }
            if (score < best_score) {
                best_score = score;
                best_lab = lab;
            }
            int pos = K0 - 1;
            while (pos >= 0 && lab[pos] == L - 1) lab[pos--] = 0;
            if (pos < 0) break;
            ++lab[pos];
        }
        for (int i = 0; i < K0; ++i) {
            res.labels[i] = best_lab[i];
            tr[best_lab[i]].last = eigs[i];
            tr[best_lab[i]].started = true;
        }
    }

    // --- greedy assignment against the fixed models ---
    for (std::size_t idx = K0; idx < eigs.size(); ++idx) {
        double e = eigs[idx];
        double best = std::numeric_limits<double>::infinity(), second = best;
        int best_l = -1;
        for (int l = 0; l < L; ++l) {
            double sp = spacing_model[l](e);
            double pred;
            if (!tr[l].started) {
                pred = ctx[l].first_expected > 0 ? ctx[l].first_expected
                                                 : band_lo + 0.5 * sp;
                if (e - pred > 1.5 * sp) pred = e - 0.5 * sp;
            } else {
                pred = tr[l].last + spacing_model[l](tr[l].last);
                // catch up over missed slots (stolen or deferred members)
                // so one bad assignment cannot starve the ladder
                if (e - pred > 0.5 * sp)
                    pred += sp * std::floor((e - pred) / sp + 0.5);
            }
            double d = std::abs(e - pred) / sp;
            if (d < best) {
                second = best;
                best = d;
                best_l = l;
            } else if (d < second) {
                second = d;
            }
        }
        if (second - best < opts.defer_margin && second < 1.5) {
            res.deferred.push_back(idx);
            continue;
        }
        res.labels[idx] = best_l;
        tr[best_l].last = e;
        tr[best_l].started = true;
    }

    // resolve deferred points jointly: every hole in a ladder (a gap of about
    // k local spacings) exposes k-1 missing slots, and each deferred point
    // fills exactly one slot, nearest first
    {
        struct Slot {
            int ladder;
            double pos, sp;
        };
        std::vector<Slot> slots;
        for (int l = 0; l < L; ++l) {
            std::vector<double> mem;
            for (std::size_t i = 0; i < eigs.size(); ++i)
                if (res.labels[i] == l) mem.push_back(eigs[i]);
            for (std::size_t i = 1; i < mem.size(); ++i) {
                double sp = spacing_model[l](0.5 * (mem[i - 1] + mem[i]));
                double gap = mem[i] - mem[i - 1];
                int k_missing = static_cast<int>(std::lround(gap / sp)) - 1;
                for (int q = 1; q <= k_missing; ++q)
                    slots.push_back({l, mem[i - 1] + gap * q / (k_missing + 1.0), sp});
            }
            // possible missing slots below the first member
            if (!mem.empty()) {
                double sp = spacing_model[l](mem.front());
                double pos = mem.front() - sp;
                while (pos > band_lo + 0.3 * sp) {
                    slots.push_back({l, pos, sp});
                    pos -= sp;
                }
            }
        }
        std::vector<bool> used_slot(slots.size(), false);
        std::vector<std::size_t> pending(res.deferred);
        // greedy nearest pairing
        while (!pending.empty()) {
            double best_d = std::numeric_limits<double>::infinity();
            std::size_t best_p = 0;
            int best_s = -1;
            for (std::size_t pi = 0; pi < pending.size(); ++pi) {
                double e = eigs[pending[pi]];
                for (std::size_t si = 0; si < slots.size(); ++si) {
                    if (used_slot[si]) continue;
                    double d = std::abs(e - slots[si].pos) / slots[si].sp;
                    if (d < best_d) {
                        best_d = d;
                        best_p = pi;
                        best_s = static_cast<int>(si);
                    }
                }
            }
            if (best_s < 0 || best_d > 1.2) break;
            res.labels[pending[best_p]] = slots[best_s].ladder;
            used_slot[best_s] = true;
            pending.erase(pending.begin() + best_p);
        }
        // leftovers go to the ladder with the nearest extension
        for (std::size_t idx : pending) {
            double e = eigs[idx];
            double best = std::numeric_limits<double>::infinity();
            int best_l = 0;
            for (int l = 0; l < L; ++l) {
                double sp = spacing_model[l](e);
                std::vector<double> mem;
                for (std::size_t i = 0; i < eigs.size(); ++i)
                    if (res.labels[i] == l) mem.push_back(eigs[i]);
                double d = 1.0;
                if (!mem.empty())
                    d = std::min(std::abs(e - (mem.front() - sp)),
                                 std::abs(e - (mem.back() + sp))) /
                        sp;
                if (d < best) {
                    best = d;
                    best_l = l;
                }
            }
            res.labels[idx] = best_l;
        }
    }
    for (std::size_t i = 0; i < eigs.size(); ++i)
        if (res.labels[i] >= 0) res.ladders[res.labels[i]].push_back(eigs[i]);
    for (auto& l : res.ladders) std::sort(l.begin(), l.end());
    return res;
}

// ===========================================================================
// Critical-value detection from counting data
// ===========================================================================

struct DetectedCritical {
    double e = 0.0;
    bool minimum = false;   // false: barrier maximum (merge event)
    double curvature = 0.0; // mu''(Z_k) for minima
    double t_birth = 0.0;   // newborn-well period at the minimum
    double strength = 0.0;  // detector signal (diagnostic)
};

struct DetectedStructure {
    double e0 = 0.0;
    double e_cap = 0.0;  // top of the usable energy range
    double mu_I_est = 0.0;
    std::vector<DetectedCritical> criticals;  // sorted by e

    std::vector<double> band_edges() const {
        std::vector<double> e{e0};
        for (const auto& c : criticals) e.push_back(c.e);
        e.push_back(e_cap);
        return e;
    }
};

struct DetectOpts {
    bool trace = false;               // print detection internals to stderr
    double jump_sigma = 4.0;          // ladder-birth jump significance
    double jump_confirm_frac = 0.06;  // births must recur across h this close
    double bump_abs = 0.65;           // absolute log-bump marking a barrier merge
    double bump_confirm_frac = 0.03;  // peak position agreement across h
    double diverge_gain = 0.55;       // log-fit rms gain for the pair bookkeeping
    double diverge_pair_frac = 0.03;  // two ladders must agree on Ec this closely
};

namespace detail {

struct PeriodProfile {
    std::vector<double> E, T;
};

/// Count-windowed total-period estimate: 2 pi h K / (width of K gaps).
inline PeriodProfile period_profile(const SpectralData& s, int K) {
    PeriodProfile pr;
    const auto& e = s.eigenvalues;
    if (static_cast<int>(e.size()) < K + 1) return pr;
    for (std::size_t j = 0; j + K < e.size(); ++j) {
        pr.E.push_back(0.5 * (e[j] + e[j + K]));
        pr.T.push_back(2.0 * pi * s.h * K / (e[j + K] - e[j]));
    }
    return pr;
}

/// Fit a separated ladder's tail periods to T = a + b log(1/(Ec - E)); a
/// significant positive b marks a barrier whose value is Ec.
struct DivergenceFit {
    bool significant = false;
    double e_c = 0.0;
    double a = 0.0, b = 0.0;
};

inline DivergenceFit divergence_fit(const std::vector<double>& members, double h,
                                    double scan_hi, double gain) {
    DivergenceFit out;
    const int n = static_cast<int>(members.size());
    if (n < 10) return out;
    std::vector<double> E, T;
    for (int i = 1; i < n; ++i) {
        E.push_back(0.5 * (members[i - 1] + members[i]));
        T.push_back(2.0 * pi * h / (members[i] - members[i - 1]));
    }
    const int m = static_cast<int>(T.size());
    // 3-point median smoothing kills alternation glitches
    std::vector<double> Ts(T);
    for (int i = 1; i + 1 < m; ++i) {
        double a = T[i - 1], b = T[i], c = T[i + 1];
        Ts[i] = std::max(std::min(a, b), std::min(std::max(a, b), c));
    }
    std::vector<double> first_half(Ts.begin(), Ts.begin() + m / 2);
    std::nth_element(first_half.begin(), first_half.begin() + first_half.size() / 2,
                     first_half.end());
    double baseline = first_half[first_half.size() / 2];
    // scan local peaks from the bottom up; post-merge regions are garbage so
    // the first credible divergence wins
    for (int i_peak = m / 4; i_peak < m; ++i_peak) {
        bool peak = (i_peak + 1 >= m || Ts[i_peak] >= Ts[i_peak + 1]) &&
                    Ts[i_peak] >= Ts[i_peak - 1];
        if (!peak || !(Ts[i_peak] > 1.22 * baseline)) continue;
        int w_lo = std::max(0, i_peak - 12);
        if (i_peak - w_lo < 6) continue;
        std::vector<double> Ew(E.begin() + w_lo, E.begin() + i_peak + 1);
        std::vector<double> Tw(Ts.begin() + w_lo, Ts.begin() + i_peak + 1);
        const int P = static_cast<int>(Ew.size());
        double meanw = 0;
        for (double t : Tw) meanw += t;
        meanw /= P;
        double rms0 = 0;
        for (double t : Tw) rms0 += (t - meanw) * (t - meanw);
        rms0 = std::sqrt(rms0 / P);
        double top = Ew.back();
        double span_scan = std::max(scan_hi - top, 1e-6);
        double best_rms = std::numeric_limits<double>::infinity();
        DivergenceFit cand;
        for (int q = 0; q <= 60; ++q) {
            double ec = top + span_scan * std::pow(3e-3, 1.0 - q / 60.0);
            std::vector<double> x;
            for (double e : Ew) x.push_back(-std::log(ec - e));
            auto [a, b] = linear_fit(x, Tw);
            double rms = 0;
            for (int i = 0; i < P; ++i) {
                double d = Tw[i] - (a + b * x[i]);
                rms += d * d;
            }
            rms = std::sqrt(rms / P);
            if (rms < best_rms) {
                best_rms = rms;
                cand.e_c = ec;
                cand.a = a;
                cand.b = b;
            }
        }
        if (cand.b > 0.0 && best_rms < gain * rms0) {
            cand.significant = true;
            return cand;
        }
    }
    return out;
}

}  // namespace detail

/// [OPERATION] detect_critical_values: minima from jumps of the counting
/// function's smoothed derivative (refined by the newborn-ladder staircase
/// fit); maxima from the log-divergence of separated ladder periods.
inline DetectedStructure detect_critical_values(const std::vector<SpectralData>& spectra,
                                                DetectOpts opts = {}) {
    if (spectra.size() < 1) throw input_error("detect: need at least one spectrum");
    const SpectralData* fine = &spectra.front();
    for (const auto& s : spectra)
        if (s.h < fine->h) fine = &s;
    if (fine->eigenvalues.size() < 8)
        throw numeric_error("detect: spectrum too sparse to resolve any band");

    DetectedStructure out;
    // E0 from the h -> 0 limit of the first eigenvalue: try both candidate
    // rates (h^{2/3} generic, h for a flat start), keep the better fit.
    {
        std::vector<double> hs, l1;
        for (const auto& s : spectra)
            if (!s.eigenvalues.empty()) {
                hs.push_back(s.h);
                l1.push_back(s.eigenvalues.front());
            }
        if (hs.size() >= 2) {
            double best_res = std::numeric_limits<double>::infinity();
            for (double expo : {2.0 / 3.0, 1.0}) {
                std::vector<double> x;
                for (double h : hs) x.push_back(std::pow(h, expo));
                auto [icpt, slope] = linear_fit(x, l1);
                double res = 0;
                for (std::size_t i = 0; i < x.size(); ++i) {
                    double d = l1[i] - (icpt + slope * x[i]);
                    res += d * d;
                }
                if (res < best_res) {
                    best_res = res;
                    out.e0 = icpt;
                }
            }
        } else {
            out.e0 = fine->eigenvalues.front();
        }
    }

    const auto& ev = fine->eigenvalues;
    const double lo = ev.front(), hi = ev.back();
    const double span = hi - lo;
    out.e_cap = hi - 1.5 * (hi - ev[ev.size() - 4]);
    out.mu_I_est = hi + 2.0 * (hi - ev[ev.size() - 2]);

    // ---- minima: jump scans at two window sizes, confirmed across h ----
    struct JumpCand {
        double e, strength;
    };
    auto scan_jumps = [&](const SpectralData& s) {
        std::vector<JumpCand> cands;
        for (int K : {8, 4}) {
            if (static_cast<int>(s.eigenvalues.size()) < 3 * K + 2) continue;
            auto pr = detail::period_profile(s, K);
            const int n = static_cast<int>(pr.E.size());
            std::vector<double> dj(n, 0.0);
            for (int i = K; i + K < n; ++i) {
                double l = 0, r = 0;
                for (int q = 1; q <= K; ++q) {
                    l += pr.T[i - q];
                    r += pr.T[std::min(i + q, n - 1)];
                }
                dj[i] = (r - l) / K;
            }
            // subtract the slow trend so a smoothly growing total period
            // does not fake a ladder birth
            std::vector<double> dj_dt(dj);
            for (int i = 0; i < n; ++i) {
                int a2 = std::max(0, i - 3 * K), b2 = std::min(n - 1, i + 3 * K);
                std::vector<double> w(dj.begin() + a2, dj.begin() + b2 + 1);
                std::nth_element(w.begin(), w.begin() + w.size() / 2, w.end());
                dj_dt[i] = dj[i] - w[w.size() / 2];
            }
            std::vector<double> mad(dj_dt);
            for (auto& v : mad) v = std::abs(v);
            std::nth_element(mad.begin(), mad.begin() + n / 2, mad.end());
            double noise = std::max(mad[n / 2], 1e-12);
            for (int i = 1; i + 1 < n; ++i) {
                bool peak = dj_dt[i] >= dj_dt[i - 1] && dj_dt[i] >= dj_dt[i + 1];
                if (!peak) continue;
                if (dj_dt[i] < opts.jump_sigma * noise) continue;
                if (dj_dt[i] < 0.35 * pr.T[std::max(i - K, 0)]) continue;
                cands.push_back({pr.E[i], dj[i]});
            }
        }
        std::sort(cands.begin(), cands.end(),
                  [](const JumpCand& a, const JumpCand& b) { return a.e < b.e; });
        std::vector<JumpCand> merged;
        for (const auto& c : cands) {
            if (!merged.empty() && c.e - merged.back().e < 0.05 * span) {
                if (c.strength > merged.back().strength) merged.back() = c;
            } else {
                merged.push_back(c);
            }
        }
        return merged;
    };
    auto minima = scan_jumps(*fine);
    if (opts.trace)
        for (const auto& c : minima)
            std::fprintf(stderr, "[detect] jump cand e=%.5f dj=%.3f\n", c.e, c.strength);
    if (spectra.size() >= 2) {
        const SpectralData* mid = nullptr;
        for (const auto& s : spectra)
            if (&s != fine && (!mid || s.h < mid->h)) mid = &s;
        auto confirm = scan_jumps(*mid);
        double mid_cover = mid->eigenvalues.size() > 6 ? mid->eigenvalues[6] : hi;
        std::vector<JumpCand> kept;
        for (const auto& c : minima) {
            if (c.e < mid_cover + 0.04 * span) {
                kept.push_back(c);  // below the coarser spectrum's coverage
                continue;
            }
            for (const auto& k2 : confirm)
                if (std::abs(k2.e - c.e) < opts.jump_confirm_frac * span) {
                    kept.push_back(c);
                    break;
                }
        }
        minima = std::move(kept);
    }

    // coarse T_birth for each minimum from the total-period strips on both
    // sides (the newborn ladder adds exactly its period); refined later from
    // the separated ladder itself
    std::vector<DetectedCritical> mins;
    {
        auto pr = detail::period_profile(*fine, std::min<int>(8, ev.size() / 5));
        auto strip_mean = [&](double e_lo, double e_hi) {
            double acc = 0;
            int cnt = 0;
            for (std::size_t i = 0; i < pr.E.size(); ++i)
                if (pr.E[i] > e_lo && pr.E[i] < e_hi) {
                    acc += pr.T[i];
                    ++cnt;
                }
            return cnt ? acc / cnt : std::numeric_limits<double>::quiet_NaN();
        };
        for (const auto& c : minima) {
            // extrapolate the background trend across the birth so the step
            // height is the newborn period alone
            std::vector<double> bx, by;
            for (std::size_t i = 0; i < pr.E.size(); ++i)
                if (pr.E[i] > c.e - 0.14 * span && pr.E[i] < c.e - 0.02 * span) {
                    bx.push_back(pr.E[i]);
                    by.push_back(pr.T[i]);
                }
            double above = strip_mean(c.e + 0.03 * span, c.e + 0.13 * span);
            double t_new;
            if (bx.size() >= 4 && std::isfinite(above)) {
                auto [b0, b1] = linear_fit(bx, by);
                t_new = above - (b0 + b1 * (c.e + 0.08 * span));
            } else {
                double below = strip_mean(c.e - 0.12 * span, c.e - 0.02 * span);
                t_new = above - below;
            }
            if (!std::isfinite(t_new) || t_new <= 0) t_new = std::max(c.strength, 0.1);
            DetectedCritical dc;
            dc.minimum = true;
            dc.e = c.e;
            dc.t_birth = t_new;
            dc.strength = c.strength;
            dc.curvature = 2.0 * pi * pi / (dc.e * t_new * t_new);
            mins.push_back(dc);
        }
    }
    std::sort(mins.begin(), mins.end(),
              [](const DetectedCritical& a, const DetectedCritical& b) { return a.e < b.e; });

    // ---- maxima: merges show as localized log-bumps of the total period,
    // persistent across h (interleaving beats are not) ----
    std::vector<double> maxima;
    {
        const SpectralData* mid = nullptr;
        for (const auto& s : spectra)
            if (&s != fine && (!mid || s.h < mid->h)) mid = &s;
        auto prof_f = detail::period_profile(*fine, std::min<int>(8, ev.size() / 5));
        std::optional<Pchip> pf, pm;
        if (prof_f.E.size() >= 4) pf.emplace(prof_f.E, prof_f.T);
        double m_lo = prof_f.E.empty() ? lo : prof_f.E.front();
        double m_hi = prof_f.E.empty() ? hi : prof_f.E.back();
        if (mid) {
            auto prof_m = detail::period_profile(
                *mid, std::min<int>(8, static_cast<int>(mid->eigenvalues.size()) / 5));
            if (prof_m.E.size() >= 4) {
                pm.emplace(prof_m.E, prof_m.T);
                m_lo = std::max(m_lo, prof_m.E.front());
                m_hi = std::min(m_hi, prof_m.E.back());
            }
        }
        if (pf && m_hi > m_lo) {
            auto avg = [&](double E) {
                double v = pf->eval(E, 0);
                if (pm) v = 0.5 * (v + pm->eval(E, 0));
                return v;
            };
            int ng = static_cast<int>((m_hi - m_lo) / (0.004 * span)) + 1;
            std::vector<double> Eg(ng), Tg(ng);
            for (int i = 0; i < ng; ++i) {
                Eg[i] = m_lo + (m_hi - m_lo) * i / std::max(ng - 1, 1);
                Tg[i] = avg(Eg[i]);
            }
            auto strip_median = [&](double e_lo2, double e_hi2) {
                std::vector<double> v;
                for (int i = 0; i < ng; ++i)
                    if (Eg[i] >= e_lo2 && Eg[i] <= e_hi2) v.push_back(Tg[i]);
                if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
                std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
                return v[v.size() / 2];
            };
            auto local_peak_near = [&](const Pchip& p, double e, double tol) {
                // does this profile have its own local bump near e?
                double best = -1e300, best_e = e;
                for (double x = e - tol; x <= e + tol; x += 0.002 * span) {
                    double v = p.eval(std::clamp(x, m_lo, m_hi), 0);
                    if (v > best) {
                        best = v;
                        best_e = x;
                    }
                }
                double side = 0.5 * (p.eval(std::clamp(e - 3 * tol, m_lo, m_hi), 0) +
                                     p.eval(std::clamp(e + 3 * tol, m_lo, m_hi), 0));
                (void)best_e;
                return best - side;
            };
            auto shape_prefers_log = [&](double e_peak) {
                // a merge bump accelerates into the peak like -log(Ec - E);
                // an interleaving beat looks linear or convex on its shoulder
                std::vector<double> Ew, Tw;
                for (int i2 = 0; i2 < ng; ++i2)
                    if (Eg[i2] > e_peak - 0.1 * span && Eg[i2] <= e_peak) {
                        Ew.push_back(Eg[i2]);
                        Tw.push_back(Tg[i2]);
                    }
                if (Ew.size() < 8) return false;
                auto [la, lb] = linear_fit(Ew, Tw);
                double rms_line = 0;
                for (std::size_t k2 = 0; k2 < Ew.size(); ++k2) {
                    double d = Tw[k2] - (la + lb * Ew[k2]);
                    rms_line += d * d;
                }
                double rms_log = std::numeric_limits<double>::infinity();
                for (int q = 0; q <= 30; ++q) {
                    double ec = e_peak + 0.002 * span + 0.06 * span * q / 30.0;
                    std::vector<double> x;
                    for (double e : Ew) x.push_back(-std::log(ec - e));
                    auto [a2, b2] = linear_fit(x, Tw);
                    if (b2 <= 0) continue;
                    double rms = 0;
                    for (std::size_t k2 = 0; k2 < Ew.size(); ++k2) {
                        double d = Tw[k2] - (a2 + b2 * x[k2]);
                        rms += d * d;
                    }
                    rms_log = std::min(rms_log, rms);
                }
                return rms_log < 0.9 * rms_line;
            };
            for (int i = 2; i + 2 < ng; ++i) {
                if (!(Tg[i] >= Tg[i - 1] && Tg[i] >= Tg[i + 1])) continue;
                if (Eg[i] > out.e_cap - 0.04 * span) continue;
                // strip background, clipped above any minimum below the peak
                double s_lo = Eg[i] - 0.18 * span, s_hi = Eg[i] - 0.06 * span;
                for (const auto& mn : minima)
                    if (mn.e < Eg[i] && mn.e + 0.04 * span > s_lo)
                        s_lo = mn.e + 0.04 * span;
                if (s_hi - s_lo < 0.04 * span) s_hi = std::min(Eg[i] - 0.03 * span, s_lo + 0.06 * span);
                double bg = strip_median(s_lo, s_hi);
                if (!std::isfinite(bg)) continue;
                if (Tg[i] - bg < opts.bump_abs) continue;
                double tol = opts.bump_confirm_frac * span;
                if (local_peak_near(*pf, Eg[i], tol) < 0.45 * opts.bump_abs) continue;
                if (pm && local_peak_near(*pm, Eg[i], tol) < 0.35 * opts.bump_abs) continue;
                bool clash = false;
                for (const auto& mn : minima)
                    if (std::abs(mn.e - Eg[i]) < 0.05 * span) clash = true;
                if (clash) continue;
                bool strong = Tg[i] - bg > 1.6 * opts.bump_abs;
                if (!strong && !shape_prefers_log(Eg[i])) {
                    if (opts.trace)
                        std::fprintf(stderr, "[detect] bump at %.5f rejected by shape\n",
                                     Eg[i]);
                    continue;
                }
                if (opts.trace)
                    std::fprintf(stderr, "[detect] max cand %.5f bump=%.3f\n", Eg[i],
                                 Tg[i] - bg);
                maxima.push_back(Eg[i]);
            }
            // dedupe, keep the first (lowest) of close peaks
            std::sort(maxima.begin(), maxima.end());
            std::vector<double> dedup;
            for (double e : maxima)
                if (dedup.empty() || e - dedup.back() > 0.045 * span) dedup.push_back(e);
                else {
                    // keep the taller one
                    if (avg(e) > avg(dedup.back())) dedup.back() = e;
                }
            // refine each peak with a log fit on its left shoulder
            for (double& ec : dedup) {
                double best_rms = std::numeric_limits<double>::infinity(), best_ec = ec;
                std::vector<double> Ew, Tw;
                for (int i = 0; i < ng; ++i)
                    if (Eg[i] > ec - 0.1 * span && Eg[i] <= ec) {
                        Ew.push_back(Eg[i]);
                        Tw.push_back(Tg[i]);
                    }
                if (Ew.size() < 6) continue;
                for (int q = 0; q <= 40; ++q) {
                    double cand = ec + 0.07 * span * (q / 40.0) - 0.005 * span;
                    if (cand <= Ew.back()) continue;
                    std::vector<double> x;
                    for (double e : Ew) x.push_back(-std::log(cand - e));
                    auto [af, bf] = linear_fit(x, Tw);
                    double rms = 0;
                    for (std::size_t k2 = 0; k2 < Ew.size(); ++k2) {
                        double d = Tw[k2] - (af + bf * x[k2]);
                        rms += d * d;
                    }
                    if (bf > 0 && rms < best_rms) {
                        best_rms = rms;
                        best_ec = cand;
                    }
                }
                ec = best_ec;
            }
            maxima = std::move(dedup);
        }
    }
    for (double e : maxima) {
        DetectedCritical dc;
        dc.minimum = false;
        dc.e = e;
        out.criticals.push_back(dc);
    }

    // ---- stretch pass: separate each band to refine the newborn minima and
    // keep per-ladder spacing bookkeeping across edges ----
    struct Live {
        double spacing;
    };
    std::vector<Live> live{{0.0}};
    auto pr_fine = detail::period_profile(*fine, std::min<int>(8, ev.size() / 5));
    std::vector<DetectedCritical*> edges_sorted;
    for (auto& c : mins) out.criticals.push_back(c);
    std::sort(out.criticals.begin(), out.criticals.end(),
              [](const DetectedCritical& a, const DetectedCritical& b) { return a.e < b.e; });
    double e_a = lo;
    for (std::size_t ei = 0; ei <= out.criticals.size(); ++ei) {
        double e_b = ei < out.criticals.size() ? out.criticals[ei].e : out.e_cap;
        double seg_hi = std::min(e_b, out.e_cap);
        std::vector<double> eigs;
        for (double e : ev)
            if (e > e_a + 1e-12 && e <= seg_hi) eigs.push_back(e);
        bool starts_at_min = ei > 0 && out.criticals[ei - 1].minimum;
        if (static_cast<int>(live.size()) >= 2 && eigs.size() >= 8) {
            double mean_gap = (eigs.back() - eigs.front()) / (eigs.size() - 1.0);
            std::vector<LadderContext> ctx(live.size());
            for (std::size_t l = 0; l < live.size(); ++l) {
                ctx[l].spacing = live[l].spacing > 0
                                     ? live[l].spacing
                                     : mean_gap * static_cast<double>(live.size());
                ctx[l].first_expected = e_a + 0.5 * ctx[l].spacing;
            }
            auto sep = separate_clusters(eigs, e_a, seg_hi, fine->h, ctx);
            // per-ladder period curves from their own gaps, quadratically
            // fitted over the clean middle of the band and extrapolated to
            // the bottom edge
            double wband = seg_hi - e_a;
            std::vector<double> t_at_bottom(live.size(),
                                            std::numeric_limits<double>::quiet_NaN());
            for (std::size_t l = 0; l < live.size(); ++l) {
                const auto& mem = sep.ladders[l];
                std::vector<double> ge, gt;
                for (std::size_t i = 1; i < mem.size(); ++i) {
                    double em = 0.5 * (mem[i - 1] + mem[i]);
                    double w_hi = std::min(0.55 * wband, 0.22 * span);
                    if (em < e_a + 0.012 * span || em > e_a + w_hi) continue;
                    ge.push_back(em);
                    gt.push_back(2.0 * pi * fine->h / (mem[i] - mem[i - 1]));
                }
                if (ge.size() < 3) continue;
                // misassigned members leave paired outlier gaps; an
                // exhaustive-pair RANSAC line keeps the consistent majority
                std::vector<double> med(gt);
                std::nth_element(med.begin(), med.begin() + med.size() / 2, med.end());
                double m0 = med[med.size() / 2];
                double tol_in = 0.06 * m0;
                int best_count = 0;
                double best_a = m0, best_b = 0.0;
                for (std::size_t i = 0; i < ge.size(); ++i)
                    for (std::size_t j2 = i + 1; j2 < ge.size(); ++j2) {
                        double b2 = (gt[j2] - gt[i]) / (ge[j2] - ge[i]);
                        if (std::abs(b2) * (ge.back() - ge.front()) > 0.8 * m0) continue;
                        double a2 = gt[i] - b2 * ge[i];
                        int cnt = 0;
                        for (std::size_t q = 0; q < ge.size(); ++q)
                            if (std::abs(gt[q] - (a2 + b2 * ge[q])) < tol_in) ++cnt;
                        if (cnt > best_count) {
                            best_count = cnt;
                            best_a = a2;
                            best_b = b2;
                        }
                    }
                if (best_count >= std::max<int>(3, static_cast<int>(ge.size()) / 3)) {
                    std::vector<double> fx, fy;
                    for (std::size_t q = 0; q < ge.size(); ++q)
                        if (std::abs(gt[q] - (best_a + best_b * ge[q])) < tol_in) {
                            fx.push_back(ge[q]);
                            fy.push_back(gt[q]);
                        }
                    auto [c0, c1] = linear_fit(fx, fy);
                    t_at_bottom[l] = c0 + c1 * e_a;
                }
            }
            if (starts_at_min) {
                // the newborn is the ladder whose bottom period matches no
                // carried ladder; the carried ones update in place
                auto& mn = out.criticals[ei - 1];
                if (opts.trace)
                    for (std::size_t l = 0; l < live.size(); ++l) {
                        std::fprintf(stderr, "[detect] ladder %zu (Tbot=%.3f):", l,
                                     t_at_bottom[l]);
                        const auto& mm = sep.ladders[l];
                        for (std::size_t i = 1; i < std::min<std::size_t>(mm.size(), 13); ++i)
                            std::fprintf(stderr, " %.3f@%.3f",
                                         2.0 * pi * fine->h / (mm[i] - mm[i - 1]),
                                         0.5 * (mm[i] + mm[i - 1]));
                        std::fprintf(stderr, "\n");
                    }
                std::vector<double> carried;
                for (std::size_t l = 0; l + 1 < live.size(); ++l)
                    carried.push_back(2.0 * pi * fine->h /
                                      std::max(live[l].spacing, 1e-12));
                int newborn = -1;
                double best_d = -1.0;
                for (std::size_t l = 0; l < live.size(); ++l) {
                    if (!std::isfinite(t_at_bottom[l])) continue;
                    double d = std::numeric_limits<double>::infinity();
                    for (double tc : carried)
                        d = std::min(d, std::abs(std::log(t_at_bottom[l] / tc)));
                    if (carried.empty()) d = 1.0;
                    if (d > best_d) {
                        best_d = d;
                        newborn = static_cast<int>(l);
                    }
                }
                if (newborn >= 0 && std::isfinite(t_at_bottom[newborn]) &&
                    t_at_bottom[newborn] > 0) {
                    double Tb = t_at_bottom[newborn];
                    mn.t_birth = Tb;
                    if (opts.trace)
                        std::fprintf(stderr,
                                     "[detect] newborn match: ladder %d Tb=%.4f (sep %.2f)\n",
                                     newborn, Tb, best_d);
                    // E_k anchors half a spacing below the newborn's first
                    // member; allow for a possibly missed first member by
                    // snapping to the coarse jump position
                    const auto& mem = sep.ladders[newborn];
                    if (!mem.empty()) {
                        double s1 = 2.0 * pi * fine->h / Tb;
                        double best_ek = mn.e;
                        double best_dist = std::numeric_limits<double>::infinity();
                        for (int k2 = 0; k2 <= 2; ++k2) {
                            double cand = mem.front() - 0.5 * s1 - k2 * s1;
                            double d2 = std::abs(cand - mn.e);
                            if (d2 < best_dist) {
                                best_dist = d2;
                                best_ek = cand;
                            }
                        }
                        if (best_dist < 0.03 * span) mn.e = best_ek;
                    }
                    mn.curvature = 2.0 * pi * pi / (mn.e * Tb * Tb);
                    if (opts.trace)
                        std::fprintf(stderr, "[detect] refined Ek=%.6f curv=%.4f\n", mn.e,
                                     mn.curvature);
                }
            }
            // spacing updates for the continuation
            for (std::size_t l = 0; l < live.size(); ++l) {
                const auto& mem = sep.ladders[l];
                if (mem.size() >= 6) {
                    std::size_t q = mem.size() * 3 / 5;
                    if (q >= 1 && q + 1 < mem.size())
                        live[l].spacing = 0.5 * (mem[q + 1] - mem[q - 1]);
                }
            }
            // a merge invisible in the union profile still shows as a joint
            // log divergence of two separated ladders: insert the missed
            // barrier maximum and reprocess from there
            if (live.size() >= 2) {
                std::vector<detail::DivergenceFit> dfits(live.size());
                for (std::size_t l = 0; l < live.size(); ++l)
                    dfits[l] = detail::divergence_fit(sep.ladders[l], fine->h,
                                                      seg_hi + 0.05 * span, opts.diverge_gain);
                if (opts.trace)
                    for (std::size_t l = 0; l < live.size(); ++l)
                        std::fprintf(stderr,
                                     "[detect] stretch (%.3f,%.3f) dfit[%zu]: sig=%d ec=%.4f b=%.3f n=%zu\n",
                                     e_a, seg_hi, l, (int)dfits[l].significant, dfits[l].e_c,
                                     dfits[l].b, sep.ladders[l].size());
                int da = -1, db = -1;
                double ec_new = 0.0;
                for (std::size_t i = 0; i < dfits.size(); ++i)
                    for (std::size_t j2 = i + 1; j2 < dfits.size(); ++j2)
                        if (dfits[i].significant && dfits[j2].significant &&
                            std::abs(dfits[i].e_c - dfits[j2].e_c) <
                                opts.diverge_pair_frac * span) {
                            double cand = 0.5 * (dfits[i].e_c + dfits[j2].e_c);
                            if (da < 0 || cand < ec_new) {
                                da = static_cast<int>(i);
                                db = static_cast<int>(j2);
                                ec_new = cand;
                            }
                        }
                bool already = false;
                for (const auto& c2 : out.criticals)
                    if (std::abs(c2.e - ec_new) < 0.04 * span) already = true;
                if (da >= 0 && !already && ec_new > e_a + 0.05 * span &&
                    ec_new < seg_hi - 0.04 * span) {
                    DetectedCritical dc2;
                    dc2.minimum = false;
                    dc2.e = ec_new;
                    if (opts.trace)
                        std::fprintf(stderr, "[detect] divergence max inserted at %.5f\n",
                                     ec_new);
                    out.criticals.insert(
                        std::upper_bound(out.criticals.begin(), out.criticals.end(), dc2,
                                         [](const DetectedCritical& a,
                                            const DetectedCritical& b) { return a.e < b.e; }),
                        dc2);
                    // reprocess this stretch, now ending at the inserted max
                    e_a = e_a;  // unchanged; the loop re-enters with new edges
                    --ei;
                    continue;
                }
            }
            if (ei < out.criticals.size() && !out.criticals[ei].minimum &&
                live.size() >= 2) {
                // bookkeeping for the merge: drop the most divergent partner
                int worst = -1;
                double worst_b = 0.0;
                for (std::size_t l = 0; l < live.size(); ++l) {
                    auto f = detail::divergence_fit(sep.ladders[l], fine->h,
                                                    seg_hi + 0.05 * span, opts.diverge_gain);
                    if (f.significant && f.b > worst_b) {
                        worst_b = f.b;
                        worst = static_cast<int>(l);
                    }
                }
                if (worst < 0) worst = static_cast<int>(live.size()) - 1;
                double t_gone = 2.0 * pi * fine->h / std::max(live[worst].spacing, 1e-12);
                live.erase(live.begin() + worst);
                // absorb its period into the slowest surviving ladder
                int host = 0;
                for (std::size_t l = 1; l < live.size(); ++l)
                    if (live[l].spacing < live[host].spacing) host = static_cast<int>(l);
                double t_host = 2.0 * pi * fine->h / std::max(live[host].spacing, 1e-12);
                live[host].spacing = 2.0 * pi * fine->h / (t_host + t_gone);
            }
        } else if (live.size() == 1 && eigs.size() >= 3) {
            live[0].spacing = (eigs.back() - eigs[eigs.size() - 3]) / 2.0;
        }
        if (ei < out.criticals.size() && out.criticals[ei].minimum) {
            Live nw;
            nw.spacing = 2.0 * pi * fine->h / std::max(out.criticals[ei].t_birth, 1e-9);
            live.push_back(nw);
        } else if (ei < out.criticals.size() && !out.criticals[ei].minimum &&
                   static_cast<int>(live.size()) >= 2 && eigs.size() < 8) {
            live.pop_back();
        }
        e_a = seg_hi;
    }
    (void)edges_sorted;
    std::sort(out.criticals.begin(), out.criticals.end(),
              [](const DetectedCritical& a, const DetectedCritical& b) { return a.e < b.e; });
    return out;
}

// ===========================================================================
// Actions from spectra
// ===========================================================================

struct LadderData {
    double h = 0.0;
    std::vector<double> eigenvalues;  // one separated ladder, ascending
    int alpha0 = 1;                   // quantization index of the first entry
};

struct ActionsFromSpectrumOpts {
    int n_out = 64;
    bool fit_maslov = false;  // estimate the h-linear coefficient instead of fixing it
};

struct ActionFit {
    ActionTable table;
    double maslov = 0.0;       // fitted or assumed h-coefficient
    double max_residual = 0.0; // worst |data - fit| over grid and h
    bool s2_available = false;
};

/// [OPERATION] actions_from_spectrum: pin S at the observed eigenvalues via
/// S(mu_alpha) = 2 pi h alpha and separate S0 / Maslov / h^2 S2 across h.
inline ActionFit actions_from_spectrum(const std::vector<LadderData>& ladders, double band_lo,
                                       double band_hi, bool half,
                                       ActionsFromSpectrumOpts opts = {}) {
    if (ladders.empty()) throw input_error("actions_from_spectrum: no ladders");
    for (const auto& l : ladders)
        if (l.eigenvalues.empty()) throw input_error("actions_from_spectrum: empty ladder");

    // common energy range with at least two members per h
    double elo = band_lo, ehi = band_hi;
    for (const auto& l : ladders) {
        if (l.eigenvalues.size() < 2)
            throw input_error("actions_from_spectrum: ladder needs >= 2 members");
        elo = std::max(elo, l.eigenvalues.front());
        ehi = std::min(ehi, l.eigenvalues.back());
    }
    if (ehi <= elo) throw numeric_error("actions_from_spectrum: no common energy overlap");

    // per-h interpolants of y(E) = 2 pi h alpha at E = mu_alpha
    std::vector<Pchip> Y;
    std::vector<double> hs;
    for (const auto& l : ladders) {
        std::vector<double> y(l.eigenvalues.size());
        for (std::size_t i = 0; i < y.size(); ++i)
            y[i] = 2.0 * pi * l.h * (l.alpha0 + static_cast<double>(i));
        Y.emplace_back(l.eigenvalues, y);
        hs.push_back(l.h);
    }

    const double maslov_default = half ? 1.5 * pi : pi;
    ActionFit out;
    out.maslov = maslov_default;
    out.s2_available = ladders.size() >= 2;

    ActionTable& t = out.table;
    t.half = half;
    t.band_lo = elo;
    t.band_hi = ehi;
    t.E = linspace(elo, ehi, opts.n_out);
    t.S0.resize(t.E.size());
    if (out.s2_available) t.S2.resize(t.E.size());
    t.T.resize(t.E.size());

    // optional global Maslov fit (needs >= 3 h values)
    if (opts.fit_maslov && hs.size() >= 3) {
        // average over a few interior energies of the per-E quadratic fit's
        // h-linear coefficient
        double acc = 0.0;
        int cnt = 0;
        for (int q = 1; q <= 4; ++q) {
            double E = elo + q * (ehi - elo) / 5.0;
            // solve [1 h h^2] c = y in least squares
            std::vector<double> yv(hs.size());
            for (std::size_t i = 0; i < hs.size(); ++i) yv[i] = Y[i](E);
            auto c = polyfit(hs, yv, 2);
            acc += polyval(c, 1.0, 1) - 2.0 * 0.0;  // derivative at h=... (see below)
            // polyval derivative at h=0 equals the linear coefficient
            cnt++;
        }
        // derivative of the fitted quadratic at h = 0
        // recompute cleanly:
        acc = 0.0;
        cnt = 0;
        for (int q = 1; q <= 4; ++q) {
            double E = elo + q * (ehi - elo) / 5.0;
            std::vector<double> yv(hs.size());
            for (std::size_t i = 0; i < hs.size(); ++i) yv[i] = Y[i](E);
            auto c = polyfit(hs, yv, 2);
            double lin = polyval(c, 0.0, 1);
            acc += lin;
            ++cnt;
        }
        out.maslov = acc / cnt;
    }

    for (std::size_t i = 0; i < t.E.size(); ++i) {
        double E = t.E[i];
        if (hs.size() == 1) {
            double c0 = Y[0](E) - out.maslov * hs[0];
            t.S0[i] = half ? 2.0 * c0 : c0;
            continue;
        }
        // least squares for c0 + c2 h^2 given y - maslov*h
        double s11 = 0, s12 = 0, s22 = 0, b1 = 0, b2 = 0;
        for (std::size_t j = 0; j < hs.size(); ++j) {
            double w = hs[j] * hs[j];
            double y = Y[j](E) - out.maslov * hs[j];
            s11 += 1.0;
            s12 += w;
            s22 += w * w;
            b1 += y;
            b2 += y * w;
        }
        double det = s11 * s22 - s12 * s12;
        double c0 = (b1 * s22 - b2 * s12) / det;
        double c2 = (s11 * b2 - s12 * b1) / det;
        t.S0[i] = half ? 2.0 * c0 : c0;
        t.S2[i] = half ? 2.0 * c2 : c2;
        for (std::size_t j = 0; j < hs.size(); ++j) {
            double fit = c0 + out.maslov * hs[j] + c2 * hs[j] * hs[j];
            out.max_residual = std::max(out.max_residual, std::abs(Y[j](E) - fit));
        }
    }
    // period column from the S0 spline derivative (loop period for half wells)
    CubicSpline s0s(t.E, t.S0);
    for (std::size_t i = 0; i < t.E.size(); ++i) {
        double d = s0s.eval(t.E[i], 1);
        t.T[i] = half ? 0.5 * d : d;
    }
    return out;
}

// ===========================================================================
// Geometry reconstruction
// ===========================================================================

/// A reconstructed piece of the profile, samples plus spline access.
struct Segment {
    std::vector<double> z, mu;

    CubicSpline spline() const { return CubicSpline(z, mu); }
    double z_lo() const { return z.front(); }
    double z_hi() const { return z.back(); }
};

struct MonotoneRecon {
    Segment seg;        // mu over [f(e_hi), z_anchor]
    double f_deep;      // f(e_hi)
    double slope_deep;  // mu'(f_deep)
};

/// [OPERATION] reconstruct_monotone: recover the decreasing flank from the
/// area function E -> integral_{f(E)}^{anchor} sqrt((E-mu)/mu) dZ via
/// f'(E) = (4/pi) sqrt(E) (d^2/dE^2) A (d/dE) area(E).
inline MonotoneRecon reconstruct_monotone(const BandFunction& area, double e_base,
                                          double z_anchor, int n_out = 120) {
    const double lo = area.lo(), hi = area.hi();
    if (std::abs(lo - e_base) > 1e-9 * (hi - lo))
        throw input_error("reconstruct_monotone: area band must start at E0");
    // derivative of the area as a band function (sqrt-zero behaved when the
    // flank starts at the anchor)
    auto dA = BandFunction::sample(
        lo, hi, [&](double E) { return area.deriv(E); }, EndBehavior::sqrt_zero, 192, 1e-6);
    auto AdA = [&](double E) { return abel_A(dA, E, 1e-11); };
    const double h0 = 2e-3 * (hi - lo);

    // f'(E) on an interior grid, then extrapolate to the base with a
    // low-order fit (the transform chain is noisy at the very edges)
    int n_fp = 140;
    double in_lo = lo + 0.015 * (hi - lo), in_hi = hi - 0.005 * (hi - lo);
    auto grid = linspace(in_lo, in_hi, n_fp);
    std::vector<double> fp(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) {
        double E = grid[i];
        double h = std::min({h0, 0.45 * (E - lo), 0.45 * (hi - E)});
        // the area runs from f(E) up to the anchor, so the Abel chain
        // recovers -f' / sqrt(u); flip for the descending turning map
        fp[i] = -4.0 / pi * std::sqrt(E) * diff2(AdA, E, h);
    });
    // sanity: monotone flank must have f' of a single sign
    int n_pos = 0, n_neg = 0;
    for (double v : fp) (v > 0 ? n_pos : n_neg)++;
    if (n_pos > 0 && n_neg > 0 && std::min(n_pos, n_neg) > n_fp / 10)
        throw reconstruction_error("reconstruct_monotone: recovered f' changes sign");

    // extend to [lo, hi] with quadratic extrapolation at the base
    std::vector<double> ge(grid), fe(fp);
    {
        std::vector<double> xs(grid.begin(), grid.begin() + 12),
            ys(fp.begin(), fp.begin() + 12);
        auto c = polyfit(xs, ys, 2);
        for (double E : {lo + 0.010 * (hi - lo), lo + 0.005 * (hi - lo), lo + 1e-9 * (hi - lo)}) {
            ge.insert(ge.begin(), E);
            fe.insert(fe.begin(), polyval(c, E));
        }
    }
    CubicSpline fps(ge, fe);

    // f(E) = anchor + integral of f'
    int n_f = n_out;
    auto egrid = linspace(lo, in_hi, n_f);
    std::vector<double> f(n_f);
    f[0] = z_anchor;
    for (int i = 1; i < n_f; ++i) {
        double a = egrid[i - 1], b = egrid[i];
        f[i] = f[i - 1] + gauss([&](double E) { return fps.eval(E, 0); }, a, b, 16);
    }
    // invert the monotone f into mu(Z)
    for (int i = 1; i < n_f; ++i)
        if (f[i] >= f[i - 1] - 1e-14)
            throw reconstruction_error("reconstruct_monotone: non-monotone recovered f");
    MonotoneRecon out;
    out.f_deep = f.back();
    out.slope_deep = 1.0 / fps.eval(egrid.back(), 0);
    std::vector<double> zs(f.rbegin(), f.rend());
    std::vector<double> mus(egrid.rbegin(), egrid.rend());
    out.seg.z = std::move(zs);
    out.seg.mu = std::move(mus);
    return out;
}

struct WellCandidate {
    int sigma = 0;
    // turning maps in the vertex-local frame: f_minus(e1) = f_plus(e1) = 0
    std::vector<double> E;        // grid over (e1, band top]
    std::vector<double> f_minus, f_plus;
    Segment shape;                // mu over [f_minus(top), f_plus(top)], local frame
};

struct WellRecon {
    std::vector<WellCandidate> candidates;  // one if symmetric, else sigma = +1 / -1
    bool clamped_symmetric = false;
    double width_top = 0.0;
};

struct WellReconOpts {
    double sym_clamp_rel = 1e-8;   // |disc| <= tol * Phi^2 treated as symmetric
    double neg_disc_rel = 5e-2;    // disc < -tol * Phi^2 is an inconsistency
    int n_out = 110;
    BInvertOpts b_opts;
};

/// [OPERATION] reconstruct_separated_well: Phi from Abel inversion of S0',
/// Psi from the B-operator inversion anchored at
/// B Psi(E1) = pi sqrt(2 E1 mu''(Z1)), then f+- = (+-Phi + sigma sqrt(disc))/2.
inline WellRecon reconstruct_separated_well(const ActionTable& table, double e1,
                                            double curvature, WellReconOpts opts = {}) {
    if (table.half) throw input_error("reconstruct_separated_well: got a half-well table");
    const double hi = table.band_hi;
    CubicSpline s0(table.E, table.S0);

    // T(E) = S0'(E), finite at the newborn bottom
    auto Tfun = BandFunction::sample(
        e1, hi, [&](double E) { return s0.eval(std::clamp(E, table.E.front(), hi), 1); },
        EndBehavior::finite, 128, 2e-4);
    // Phi/sqrt(u) = g from T = T[g]
    auto gfun = abel_T_invert(Tfun, EndBehavior::sqrt_singular, 128);

    // B Psi from S2: (B Psi)' = -12 S2, anchored at pi sqrt(2 E1 mu'')
    if (!table.has_s2())
        throw input_error("reconstruct_separated_well: S2 required");
    CubicSpline s2(table.E, table.S2);
    double anchor = pi * std::sqrt(2.0 * e1 * curvature);
    auto G = [&]() {
        int n = 160;
        auto grid = edge_refined_grid(e1 + 1e-6 * (hi - e1), hi, n);
        std::vector<double> v(grid.size());
        double acc = anchor;
        double prev = e1;
        for (int i = 0; i < n; ++i) {
            double E = grid[i];
            acc += gauss(
                [&](double u) {
                    return -12.0 * s2.eval(std::clamp(u, table.E.front(), table.E.back()), 0);
                },
                prev, E, 16);
            v[i] = acc;
            prev = E;
        }
        return BandFunction(e1, hi, std::move(grid), std::move(v), EndBehavior::finite);
    }();
    auto psi = b_invert(G, e1, curvature, opts.b_opts);

    // assemble f+-' and integrate from the vertex
    WellRecon out;
    const double top = psi.hi() - 1e-3 * (psi.hi() - e1);
    auto egrid = edge_refined_grid(e1 + 1e-4 * (hi - e1), top, opts.n_out);

    // sigma candidates; disc in regularized form to survive the 1/sqrt at e1
    auto phi_reg = [&](double u) { return std::sqrt(u) * gfun.reg(u); };  // Phi * sqrt(u-e1)
    auto disc_scaled = [&](double u) {
        // disc * (u - e1): Phi^2 (u-e1) - 4 (u-e1) Phi / Psi
        double pr = phi_reg(u);
        double psir = psi.reg(u);  // Psi / sqrt(u-e1)
        return pr * pr - 4.0 * pr / std::max(psir, 1e-300);
    };
    // symmetric? sample a few interior points
    bool symmetric = true;
    double worst_ratio = 0.0;
    for (int q = 1; q <= 8; ++q) {
        double u = e1 + q * (top - e1) / 9.0;
        double pr = phi_reg(u);
        double ds = disc_scaled(u);
        worst_ratio = std::max(worst_ratio, ds / (pr * pr));
        if (std::abs(ds) > opts.sym_clamp_rel * pr * pr) symmetric = false;
        if (ds < -opts.neg_disc_rel * pr * pr)
            throw reconstruction_error("reconstruct_separated_well: negative discriminant");
        if (psi.value(u) <= 0)
            throw reconstruction_error("reconstruct_separated_well: Psi crosses zero");
    }
    out.clamped_symmetric = symmetric;

    auto build = [&](int sigma) {
        WellCandidate c;
        c.sigma = sigma;
        c.E = egrid;
        c.f_minus.resize(egrid.size());
        c.f_plus.resize(egrid.size());
        double fm = 0.0, fpv = 0.0, prev = e1;
        for (std::size_t i = 0; i < egrid.size(); ++i) {
            double E = egrid[i];
            // integrate (Phi +- sqrt(disc))/2 over (prev, E); both integrands
            // carry the 1/sqrt(u-e1) factor handled by the t^2 substitution
            auto seg_int = [&](bool plus_branch) {
                return integrate_invsqrt_left(
                    [&](double u) {
                        double su = std::sqrt(std::max(u - e1, 1e-300));
                        double Phi = phi_reg(u) / su;
                        double ds = std::max(disc_scaled(u), 0.0);
                        double root = sigma == 0 ? 0.0 : std::sqrt(ds) / su;
                        double val = plus_branch ? (Phi + sigma * root) : (-Phi + sigma * root);
                        return 0.5 * val;
                    },
                    prev, E, 1e-9);
            };
            fpv += seg_int(true);
            fm += seg_int(false);
            c.f_minus[i] = fm;
            c.f_plus[i] = fpv;
            prev = E;
        }
        // shape: invert both flanks into mu(Z) in the local frame
        std::vector<double> zs, mus;
        for (std::size_t i = egrid.size(); i-- > 0;) {
            zs.push_back(c.f_minus[i]);
            mus.push_back(egrid[i]);
        }
        zs.push_back(0.0);
        mus.push_back(e1);
        for (std::size_t i = 0; i < egrid.size(); ++i) {
            zs.push_back(c.f_plus[i]);
            mus.push_back(egrid[i]);
        }
        c.shape.z = std::move(zs);
        c.shape.mu = std::move(mus);
        return c;
    };

    if (symmetric) {
        out.candidates.push_back(build(0));
    } else {
        out.candidates.push_back(build(+1));
        out.candidates.push_back(build(-1));
    }
    out.width_top =
        out.candidates[0].f_plus.back() - out.candidates[0].f_minus.back();
    return out;
}

// ===========================================================================
// Gluing
// ===========================================================================

struct BarrierFit {
    double z_apex = 0.0, e_apex = 0.0, curvature = 0.0;  // local quadratic model
    bool valid = false;
};

/// Quadratic fit of a flank near its top; apex may sit just outside the data.
inline BarrierFit fit_barrier(const std::vector<double>& z, const std::vector<double>& mu,
                              double e_top_ref, double window_frac = 0.25) {
    BarrierFit out;
    if (z.size() < 6) return out;
    // keep the samples whose mu is within window_frac of the top value range
    double mu_top = *std::max_element(mu.begin(), mu.end());
    double mu_bot = *std::min_element(mu.begin(), mu.end());
    double cut = mu_top - window_frac * (mu_top - mu_bot);
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < z.size(); ++i)
        if (mu[i] >= cut) {
            xs.push_back(z[i]);
            ys.push_back(mu[i]);
        }
    if (xs.size() < 5) return out;
    auto c = polyfit(xs, ys, 2);
    double a2 = polyval(c, xs[0], 2);  // constant for a quadratic
    if (a2 >= 0) return out;           // not a cap
    // apex: solve c'(z) = 0
    double z0 = xs[xs.size() / 2];
    double d1 = polyval(c, z0, 1);
    double za = z0 - d1 / a2;
    out.z_apex = za;
    out.e_apex = polyval(c, za);
    out.curvature = a2;
    out.valid = std::isfinite(out.e_apex) && std::abs(out.e_apex - e_top_ref) <
                                                 0.5 * std::max(1.0, std::abs(e_top_ref));
    return out;
}

struct GlueResult {
    int chosen_sigma = 0;
    double translation = 0.0;  // shift applied to the candidate's local frame
    double mismatch = 0.0;
    double rejected_mismatch = 0.0;  // the other branch (0 if only one)
    bool tie = false;
};

struct GlueOpts {
    double mismatch_threshold = 0.08;  // relative to the local mu scale
    double tie_rel = 0.10;
};

/// [OPERATION] glue: choose sigma and translation by smoothness of the join
/// at the shared barrier top. surface_* is the already-anchored side (deep
/// flank of the surface region), candidates carry their own right flanks.
inline GlueResult glue_candidates(const std::vector<double>& surf_z,
                                  const std::vector<double>& surf_mu,
                                  const std::vector<WellCandidate>& candidates, double e_top,
                                  GlueOpts opts = {}) {
    BarrierFit sb = fit_barrier(surf_z, surf_mu, e_top);
    if (!sb.valid) throw reconstruction_error("glue: no barrier cap on the anchored side");

    struct Scored {
        double mismatch, translation;
        int sigma;
    };
    std::vector<Scored> scored;
    for (const auto& c : candidates) {
        // candidate's right flank near the top
        std::vector<double> cz, cmu;
        for (std::size_t i = 0; i < c.E.size(); ++i) {
            cz.push_back(c.f_plus[i]);
            cmu.push_back(c.E[i]);
        }
        BarrierFit cb = fit_barrier(cz, cmu, e_top);
        if (!cb.valid) continue;
        double t = sb.z_apex - cb.z_apex;
        // mismatch: residual of one quartic through both sides' top samples
        std::vector<double> xs, ys;
        double mu_cut = e_top - 0.3 * (e_top - *std::min_element(cmu.begin(), cmu.end()));
        for (std::size_t i = 0; i < surf_z.size(); ++i)
            if (surf_mu[i] >= mu_cut) {
                xs.push_back(surf_z[i]);
                ys.push_back(surf_mu[i]);
            }
        for (std::size_t i = 0; i < cz.size(); ++i)
            if (cmu[i] >= mu_cut) {
                xs.push_back(cz[i] + t);
                ys.push_back(cmu[i]);
            }
        if (xs.size() < 8) continue;
        auto q = polyfit(xs, ys, 4);
        double rss = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            double d = ys[i] - polyval(q, xs[i]);
            rss += d * d;
        }
        double scale = std::max(e_top - mu_cut, 1e-12);
        scored.push_back({std::sqrt(rss / xs.size()) / scale, t, c.sigma});
    }
    if (scored.empty()) throw reconstruction_error("glue: no candidate produced a barrier cap");
    std::sort(scored.begin(), scored.end(),
              [](const Scored& a, const Scored& b) { return a.mismatch < b.mismatch; });
    GlueResult out;
    out.chosen_sigma = scored[0].sigma;
    out.translation = scored[0].translation;
    out.mismatch = scored[0].mismatch;
    out.rejected_mismatch = scored.size() > 1 ? scored[1].mismatch : 0.0;
    if (scored.size() > 1 &&
        std::abs(scored[0].mismatch - scored[1].mismatch) <
            opts.tie_rel * std::max(scored[0].mismatch, 1e-12))
        out.tie = true;
    if (out.mismatch > opts.mismatch_threshold)
        throw reconstruction_error("glue: both candidates exceed the mismatch threshold");
    return out;
}

// Integrals over an already-known region [z_lo, z_hi] whose edge values sit
// at the band bottom: the integrand has steep (though integrable) boundary
// layers when E is near that level, so integrate under Z = mid + r sin(theta)
// which clusters nodes at both edges.
template <class F>
inline double region_integral(const F& f, double z_lo, double z_hi) {
    const double mid = 0.5 * (z_lo + z_hi), r = 0.5 * (z_hi - z_lo);
    return integrate([&](double th) { return r * std::cos(th) * f(mid + r * std::sin(th)); },
                     -pi / 2, pi / 2, 1e-9, 12);
}

inline double region_area(const CubicSpline& mu, double z_lo, double z_hi, double E) {
    return region_integral(
        [&](double Z) {
            double m = mu.eval(Z, 0);
            return std::sqrt(std::max(E - m, 0.0) / m);
        },
        z_lo, z_hi);
}

inline double region_period(const CubicSpline& mu, double z_lo, double z_hi, double E) {
    return region_integral(
        [&](double Z) {
            double m = mu.eval(Z, 0);
            return 1.0 / std::sqrt(m * std::max(E - m, 1e-300));
        },
        z_lo, z_hi);
}

inline double region_J(const CubicSpline& mu, double z_lo, double z_hi, double E) {
    return region_integral(
        [&](double Z) {
            double m = mu.eval(Z, 0), d1 = mu.eval(Z, 1), d2 = mu.eval(Z, 2);
            return (E * d2 - 2.0 * (E - m) / m * d1 * d1) /
                   std::sqrt(m * std::max(E - m, 1e-300));
        },
        z_lo, z_hi);
}

inline double region_K(const CubicSpline& mu, double z_lo, double z_hi, double E) {
    return region_integral(
        [&](double Z) {
            double m = mu.eval(Z, 0), d2 = mu.eval(Z, 2);
            return d2 / std::sqrt(m * std::max(E - m, 1e-300));
        },
        z_lo, z_hi);
}

/// [OPERATION] reconstruct_deep_tail: A2 = total - A1 over the top band, then
/// the monotone machinery anchored at the known deep edge Z-.
inline MonotoneRecon reconstruct_deep_tail(const BandFunction& total_area,
                                           const std::function<double(double)>& known_area,
                                           double e_base, double z_anchor) {
    auto a2 = BandFunction::sample(
        e_base, total_area.hi(),
        [&](double E) {
            double v = total_area.value(E) - known_area(E);
            if (v < -1e-6 * std::max(1.0, total_area.value(E)))
                throw reconstruction_error("deep_tail: negative remainder area");
            return std::max(v, 0.0);
        },
        EndBehavior::sqrt_zero, 160, 1e-5);
    return reconstruct_monotone(a2, e_base, z_anchor);
}

// ===========================================================================
// The full pipeline
// ===========================================================================

struct ReconStep {
    int band = 0;
    std::string method;
    double residual = 0.0;
};

struct ReconstructionResult {
    std::shared_ptr<SampledProfile> profile;
    std::vector<ReconStep> steps;
    std::vector<int> sigmas;                // resolved sigma per separated well
    std::vector<double> translations;       // chosen placement per separated well
    double sup_error = std::numeric_limits<double>::quiet_NaN();
    DetectedStructure detected;
};

struct ReconstructOpts {
    DetectOpts detect;
    SeparateOpts separate;
    WellReconOpts well;
    GlueOpts glue;
    int profile_samples = 601;
};

namespace detail {

/// One floating well assembly: candidate shapes in a local frame (the birth
/// vertex at 0), growing band by band until a merge or the final glue places
/// it absolutely.
struct Assembly {
    struct Cand {
        std::vector<double> z, mu;  // shape samples, local frame
        int sigma_birth = 0;
    };
    std::vector<Cand> candidates;
    double e_bottom = 0.0;  // birth (or merge) critical value
    double e_top = 0.0;     // current data coverage
    bool placed = false;
    double translation = 0.0;
    int chosen = -1;
    double glue_mismatch = 0.0, glue_rejected = 0.0;
};

inline void prepend_segment(std::vector<double>& z, std::vector<double>& mu,
                            const Segment& seg) {
    double z_cut = z.empty() ? 1e300 : z.front();
    std::vector<double> oz(std::move(z)), omu(std::move(mu));
    z.clear();
    mu.clear();
    for (std::size_t i = 0; i < seg.z.size(); ++i)
        if (seg.z[i] < z_cut - 1e-12) {
            z.push_back(seg.z[i]);
            mu.push_back(seg.mu[i]);
        }
    z.insert(z.end(), oz.begin(), oz.end());
    mu.insert(mu.end(), omu.begin(), omu.end());
}

/// Join two flanks over a barrier: samples of both sides plus a locally
/// fitted quartic bridging the gap around the apex.
inline void bridge_join(std::vector<double>& z, std::vector<double>& mu, double gap_lo,
                        double gap_hi, double e_top) {
    // collect nearby samples on both sides of the gap
    std::vector<double> xs, ys;
    double w = std::max(gap_hi - gap_lo, 1e-6);
    for (std::size_t i = 0; i < z.size(); ++i)
        if ((z[i] > gap_lo - 2.0 * w && z[i] < gap_lo + 1e-12) ||
            (z[i] < gap_hi + 2.0 * w && z[i] > gap_hi - 1e-12)) {
            xs.push_back(z[i]);
            ys.push_back(mu[i]);
        }
    if (xs.size() < 6) return;
    auto q = polyfit(xs, ys, 4);
    std::vector<double> nz, nmu;
    for (std::size_t i = 0; i < z.size() && z[i] <= gap_lo + 1e-12; ++i) {
        nz.push_back(z[i]);
        nmu.push_back(mu[i]);
    }
    int nfill = 9;
    for (int i = 1; i < nfill; ++i) {
        double zz = gap_lo + (gap_hi - gap_lo) * i / nfill;
        nz.push_back(zz);
        nmu.push_back(std::min(polyval(q, zz), e_top));
    }
    for (std::size_t i = 0; i < z.size(); ++i)
        if (z[i] >= gap_hi - 1e-12) {
            nz.push_back(z[i]);
            nmu.push_back(mu[i]);
        }
    z = std::move(nz);
    mu = std::move(nmu);
}

}  // namespace detail

/// [OPERATION] reconstruct_multiwell_band: extend an assembly's shape with the
/// band's outer flanks after subtracting the known core contributions.
/// The candidate's shape grows in place.
inline void reconstruct_multiwell_band(detail::Assembly::Cand& cand, const ActionTable& data,
                                       double e_lo, WellReconOpts opts = {}) {
    CubicSpline core(cand.z, cand.mu);
    const double zl = cand.z.front(), zr = cand.z.back();
    const double hi = data.band_hi;
    // core edge data
    double dmu_l = core.eval(zl, 1), dmu_r = core.eval(zr, 1);
    double d2_l = core.eval(zl, 2), d2_r = core.eval(zr, 2);
    if (!(dmu_l < 0.0) || !(dmu_r > 0.0))
        throw reconstruction_error("multiwell: core edges are not well walls");

    CubicSpline s0(data.E, data.S0);
    // T difference, finite at the base
    auto Tdiff = BandFunction::sample(
        e_lo, hi,
        [&](double E) {
            double tt = s0.eval(std::clamp(E, data.E.front(), data.E.back()), 1);
            return std::max(tt - region_period(core, zl, zr, E), 0.0);
        },
        EndBehavior::sqrt_zero, 128, 2e-4);
    auto gfun = abel_T_invert(Tdiff, EndBehavior::finite, 128);
    auto Phi = [&](double u) { return std::sqrt(u) * gfun.value(u); };

    // B Psi for the outer flanks: (B Psi)' = -12 S2 - J_core' - 3 K_core
    if (!data.has_s2()) throw input_error("multiwell: S2 required");
    CubicSpline s2(data.E, data.S2);
    auto Jc = [&](double E) { return region_J(core, zl, zr, E); };
    auto rhsG = [&](double E) {
        double de = 2e-3 * (hi - e_lo);
        double dj = (Jc(E + de) - Jc(E - de)) / (2 * de);
        return -12.0 * s2.eval(std::clamp(E, data.E.front(), data.E.back()), 0) - dj -
               3.0 * region_K(core, zl, zr, E);
    };
    int ng = 140;
    auto ggrid = edge_refined_grid(e_lo + 1e-5 * (hi - e_lo), hi, ng);
    std::vector<double> gv(ggrid.size());
    double acc = 0.0, prev = e_lo;
    for (int i = 0; i < ng; ++i) {
        acc += gauss([&](double u) { return rhsG(std::min(u, hi - 1e-3 * (hi - e_lo))); }, prev,
                     ggrid[i], 8);
        gv[i] = acc;
        prev = ggrid[i];
    }
    BandFunction G(e_lo, hi, std::move(ggrid), std::move(gv), EndBehavior::finite);
    double psi0 = dmu_r - dmu_l;
    double dpsi0 = d2_r / dmu_r - d2_l / dmu_l;
    auto psi = b_invert_iv(G, psi0, dpsi0, opts.b_opts);

    int sigma = sgn(1.0 / dmu_r + 1.0 / dmu_l);
    auto disc = [&](double u) {
        double P = Phi(u);
        double ps = psi.value(u);
        if (ps <= 0) throw reconstruction_error("multiwell: Psi crosses zero");
        return P * P - 4.0 * P / ps;
    };

    // integrate the outer turning maps from the known anchors
    const double top = psi.hi() - 1e-3 * (psi.hi() - e_lo);
    auto egrid = edge_refined_grid(e_lo + 2e-4 * (hi - e_lo), top, 90);
    std::vector<double> fm(egrid.size()), fp(egrid.size());
    double am = zl, ap = zr, eprev = e_lo;
    for (std::size_t i = 0; i < egrid.size(); ++i) {
        double E = egrid[i];
        auto seg_int = [&](bool plus_branch) {
            return integrate(
                [&](double u) {
                    double ds = std::max(disc(u), 0.0);
                    double root = sigma == 0 ? 0.0 : sigma * std::sqrt(ds);
                    return 0.5 * (plus_branch ? Phi(u) + root : -Phi(u) + root);
                },
                eprev, E, 1e-9);
        };
        ap += seg_int(true);
        am += seg_int(false);
        fp[i] = ap;
        fm[i] = am;
        eprev = E;
    }
    // splice: left flank (descending z), core, right flank
    std::vector<double> nz, nmu;
    for (std::size_t i = egrid.size(); i-- > 0;) {
        if (fm[i] < zl - 1e-12) {
            nz.push_back(fm[i]);
            nmu.push_back(egrid[i]);
        }
    }
    nz.insert(nz.end(), cand.z.begin(), cand.z.end());
    nmu.insert(nmu.end(), cand.mu.begin(), cand.mu.end());
    for (std::size_t i = 0; i < egrid.size(); ++i) {
        if (fp[i] > zr + 1e-12) {
            nz.push_back(fp[i]);
            nmu.push_back(egrid[i]);
        }
    }
    cand.z = std::move(nz);
    cand.mu = std::move(nmu);
}

// ===========================================================================

inline ReconstructionResult full_pipeline(std::vector<SpectralData> spectra,
                                          ReconstructOpts opts = {},
                                          const ProfileModel* truth = nullptr);

}  // namespace specwell

#include "specwell/reconstruct_pipeline.hpp"
