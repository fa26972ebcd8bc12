#pragma once

// full_pipeline: orchestrates detection, per-band cluster separation, action
// extraction, and the band-by-band geometric reconstruction with gluing.
// Included at the end of reconstruct.hpp.

#include <list>

namespace specwell {

namespace detail {

struct LiveLadder {
    bool half = false;
    int assembly = -1;           // index into the assembly store (wells only)
    bool newborn = false;
    double birth_e = 0.0, birth_curv = 0.0;
    double s0_top = 0.0;         // S0 (S~0 for half) at e_prev_top
    double e_prev_top = 0.0;
    double t_top = 0.0;          // dS/dE scale: T for wells, loop period for half
    std::map<int, double> last_e;  // per spectrum index
};

inline double s0_extrapolate(const LiveLadder& l, double E) {
    double slope = l.half ? 2.0 * l.t_top : l.t_top;  // dS0/dE (S~0' = 2 loop)
    return std::max(l.s0_top + slope * (E - l.e_prev_top), 0.0);
}

inline int anchor_alpha(const LiveLadder& l, double mu_first, double h) {
    double s0e = s0_extrapolate(l, mu_first);
    double S = l.half ? 0.5 * s0e + 1.5 * pi * h : s0e + pi * h;
    double a = S / (2.0 * pi * h);
    int ai = static_cast<int>(std::lround(a));
    if (std::abs(a - ai) > 0.42)
        throw reconstruction_error("actions: quantization offset ambiguous (|frac| too large)");
    return std::max(ai, 1);
}

/// Right (or left) flank samples of a candidate shape near its top.
inline void flank_tail(const std::vector<double>& z, const std::vector<double>& mu, bool right,
                       std::vector<double>& fz, std::vector<double>& fmu) {
    fz.clear();
    fmu.clear();
    if (right) {
        std::size_t i = z.size() - 1;
        fz.push_back(z[i]);
        fmu.push_back(mu[i]);
        while (i-- > 0 && mu[i] < fmu.back()) {
            fz.push_back(z[i]);
            fmu.push_back(mu[i]);
        }
        std::reverse(fz.begin(), fz.end());
        std::reverse(fmu.begin(), fmu.end());
    } else {
        std::size_t i = 0;
        fz.push_back(z[i]);
        fmu.push_back(mu[i]);
        while (++i < z.size() && mu[i] < fmu.back()) {
            fz.push_back(z[i]);
            fmu.push_back(mu[i]);
        }
    }
}

struct PlacementScore {
    double mismatch = std::numeric_limits<double>::infinity();
    double translation = 0.0;
    int cand = -1;
};

/// Score the C^2 smoothness of attaching a candidate's flank to an anchored
/// flank at a shared barrier top.
inline PlacementScore score_attach(const std::vector<double>& anchored_z,
                                   const std::vector<double>& anchored_mu,
                                   const std::vector<double>& cz,
                                   const std::vector<double>& cmu, bool cand_right_flank,
                                   double e_top) {
    PlacementScore out;
    std::vector<double> fz, fmu;
    flank_tail(cz, cmu, cand_right_flank, fz, fmu);
    if (fz.size() < 5) return out;
    BarrierFit cb = fit_barrier(fz, fmu, e_top);
    BarrierFit sb = fit_barrier(anchored_z, anchored_mu, e_top);
    if (!cb.valid || !sb.valid) return out;
    double t = sb.z_apex - cb.z_apex;
    // joint quartic residual across the barrier
    double mu_min_c = *std::min_element(fmu.begin(), fmu.end());
    double mu_cut = e_top - 0.5 * (e_top - mu_min_c);
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < anchored_z.size(); ++i)
        if (anchored_mu[i] >= mu_cut) {
            xs.push_back(anchored_z[i]);
            ys.push_back(anchored_mu[i]);
        }
    for (std::size_t i = 0; i < fz.size(); ++i)
        if (fmu[i] >= mu_cut) {
            xs.push_back(fz[i] + t);
            ys.push_back(fmu[i]);
        }
    if (xs.size() < 8) return out;
    auto q = polyfit(xs, ys, 4);
    double rss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double d = ys[i] - polyval(q, xs[i]);
        rss += d * d;
    }
    out.mismatch = std::sqrt(rss / xs.size()) / std::max(e_top - mu_cut, 1e-12);
    out.translation = t;
    return out;
}

}  // namespace detail

inline ReconstructionResult full_pipeline(std::vector<SpectralData> spectra,
                                          ReconstructOpts opts,
                                          const ProfileModel* truth) {
    using detail::Assembly;
    using detail::LiveLadder;
    if (spectra.empty()) throw input_error("full_pipeline: no spectra");
    std::sort(spectra.begin(), spectra.end(),
              [](const SpectralData& a, const SpectralData& b) { return a.h > b.h; });
    for (const auto& s : spectra)
        if (s.eigenvalues.empty()) throw input_error("full_pipeline: empty spectrum");

    ReconstructionResult res;
    res.detected = detect_critical_values(spectra, opts.detect);
    const auto& det = res.detected;
    auto edges = det.band_edges();
    const int K = static_cast<int>(edges.size()) - 1;
    const bool leading_only = spectra.size() < 2;

    // anchored surface region
    std::vector<double> zs, mus;
    double z_deep = 0.0;
    std::vector<Assembly> assemblies;
    std::vector<LiveLadder> live;  // [0] is always the half well
    {
        LiveLadder half;
        half.half = true;
        half.e_prev_top = det.e0;
        half.s0_top = 0.0;
        half.t_top = 0.0;  // unknown until the first band is fitted
        live.push_back(half);
    }

    auto surface_tail = [&](std::vector<double>& tz, std::vector<double>& tmu) {
        // deep-flank samples of the anchored region (ascending z from z_deep)
        tz.clear();
        tmu.clear();
        double mu_deep = mus.empty() ? det.e0 : mus.front();
        for (std::size_t i = 0; i < zs.size() && tz.size() < 60; ++i) {
            if (mus[i] > mu_deep + 1e-12 && !tz.empty()) break;  // flank ended
            tz.push_back(zs[i]);
            tmu.push_back(mus[i]);
            mu_deep = mus[i];
        }
    };

    auto place_assembly = [&](int ai, double e_top_glue) {
        Assembly& A = assemblies[ai];
        std::vector<double> tz, tmu;
        surface_tail(tz, tmu);
        detail::PlacementScore best, second;
        for (std::size_t ci = 0; ci < A.candidates.size(); ++ci) {
            auto sc = detail::score_attach(tz, tmu, A.candidates[ci].z, A.candidates[ci].mu,
                                           true, e_top_glue);
            sc.cand = static_cast<int>(ci);
            if (sc.mismatch < best.mismatch) {
                second = best;
                best = sc;
            } else if (sc.mismatch < second.mismatch) {
                second = sc;
            }
        }
        if (!std::isfinite(best.mismatch))
            throw reconstruction_error("glue: no candidate attaches at the barrier");
        if (best.mismatch > opts.glue.mismatch_threshold)
            throw reconstruction_error("glue: mismatch above threshold");
        A.placed = true;
        A.chosen = best.cand;
        A.translation = best.translation;
        A.glue_mismatch = best.mismatch;
        A.glue_rejected = std::isfinite(second.mismatch) ? second.mismatch : 0.0;
        bool tie = std::isfinite(second.mismatch) &&
                   std::abs(second.mismatch - best.mismatch) <
                       opts.glue.tie_rel * std::max(best.mismatch, 1e-12);
        int sigma = A.candidates[best.cand].sigma_birth;
        res.sigmas.push_back(tie ? 0 : sigma);
        res.translations.push_back(best.translation);
        // splice the placed shape below the surface region
        const auto& C = A.candidates[best.cand];
        double gap_lo = C.z.back() + A.translation;
        double gap_hi = zs.empty() ? 0.0 : zs.front();
        std::vector<double> nz, nmu;
        for (std::size_t i = 0; i < C.z.size(); ++i) {
            nz.push_back(C.z[i] + A.translation);
            nmu.push_back(C.mu[i]);
        }
        nz.insert(nz.end(), zs.begin(), zs.end());
        nmu.insert(nmu.end(), mus.begin(), mus.end());
        zs = std::move(nz);
        mus = std::move(nmu);
        detail::bridge_join(zs, mus, gap_lo, gap_hi, e_top_glue);
        z_deep = zs.front();
        return best.mismatch;
    };

    for (int k = 1; k <= K; ++k) {
        double lo = edges[k - 1], hi = edges[k];
        if (hi - lo < 1e-6 * (det.e_cap - det.e0)) continue;

        // --- event at the band bottom ---
        if (k >= 2) {
            const auto& c = det.criticals[k - 2];
            if (c.minimum) {
                LiveLadder nw;
                nw.half = false;
                nw.newborn = true;
                nw.birth_e = c.e;
                nw.birth_curv = c.curvature;
                nw.e_prev_top = c.e;
                nw.s0_top = 0.0;
                nw.t_top = c.t_birth;
                live.push_back(nw);
            } else {
                // a barrier submerged: either a well joins the half well, or
                // two wells join each other
                std::vector<double> tz, tmu;
                surface_tail(tz, tmu);
                BarrierFit sb = fit_barrier(tz, tmu, c.e);
                bool half_merge =
                    sb.valid && std::abs(sb.e_apex - c.e) < 0.05 * (det.e_cap - det.e0);
                std::vector<int> unplaced;
                for (std::size_t i = 0; i < live.size(); ++i)
                    if (!live[i].half && live[i].assembly >= 0 &&
                        !assemblies[live[i].assembly].placed)
                        unplaced.push_back(static_cast<int>(i));
                if (half_merge) {
                    if (unplaced.empty())
                        throw reconstruction_error("merge event with no floating well");
                    // pick the assembly that glues best
                    int best_l = -1;
                    double best_m = std::numeric_limits<double>::infinity();
                    for (int li : unplaced) {
                        std::vector<double> t2z, t2mu;
                        surface_tail(t2z, t2mu);
                        const Assembly& A = assemblies[live[li].assembly];
                        for (const auto& cand : A.candidates) {
                            auto sc = detail::score_attach(t2z, t2mu, cand.z, cand.mu, true, c.e);
                            if (sc.mismatch < best_m) {
                                best_m = sc.mismatch;
                                best_l = li;
                            }
                        }
                    }
                    if (best_l < 0) throw reconstruction_error("merge: no attachable well");
                    double mm = place_assembly(live[best_l].assembly, c.e);
                    res.steps.push_back({k, "glue", mm});
                    // the half ladder absorbs the well ladder
                    LiveLadder& Hf = live[0];
                    LiveLadder& Wl = live[best_l];
                    double s0_half_at_e = detail::s0_extrapolate(Hf, c.e);
                    double s0_well_at_e = detail::s0_extrapolate(Wl, c.e);
                    Hf.s0_top = s0_half_at_e + 2.0 * s0_well_at_e;
                    Hf.t_top = Hf.t_top + Wl.t_top;
                    Hf.e_prev_top = c.e;
                    for (auto& [si, le] : Wl.last_e) {
                        auto it = Hf.last_e.find(si);
                        if (it == Hf.last_e.end() || le > it->second) Hf.last_e[si] = le;
                    }
                    live.erase(live.begin() + best_l);
                } else {
                    if (unplaced.size() != 2)
                        throw reconstruction_error(
                            "merge: expected exactly two floating wells for a well-well join");
                    int la = unplaced[0], lb = unplaced[1];
                    Assembly& A = assemblies[live[la].assembly];
                    Assembly& B = assemblies[live[lb].assembly];
                    // decide which is left of the barrier: try both orders
                    detail::PlacementScore best;
                    int bca = -1, bcb = -1;
                    bool a_left = true;
                    for (int order = 0; order < 2; ++order) {
                        Assembly& L = order == 0 ? A : B;
                        Assembly& R = order == 0 ? B : A;
                        for (std::size_t i = 0; i < L.candidates.size(); ++i)
                            for (std::size_t j = 0; j < R.candidates.size(); ++j) {
                                // attach R's left flank to L's right flank
                                std::vector<double> lz, lmu;
                                detail::flank_tail(L.candidates[i].z, L.candidates[i].mu, true,
                                                   lz, lmu);
                                auto sc = detail::score_attach(
                                    lz, lmu, R.candidates[j].z, R.candidates[j].mu, false, c.e);
                                if (sc.mismatch < best.mismatch) {
                                    best = sc;
                                    bca = static_cast<int>(order == 0 ? i : j);
                                    bcb = static_cast<int>(order == 0 ? j : i);
                                    a_left = order == 0;
                                }
                            }
                    }
                    if (!std::isfinite(best.mismatch))
                        throw reconstruction_error("merge: wells do not join at the barrier");
                    // build the merged assembly (canonical + mirror)
                    Assembly M;
                    M.e_bottom = c.e;
                    const auto& CL = a_left ? A.candidates[bca] : B.candidates[bcb];
                    const auto& CR = a_left ? B.candidates[bcb] : A.candidates[bca];
                    Assembly::Cand merged;
                    merged.z = CL.z;
                    merged.mu = CL.mu;
                    for (std::size_t i = 0; i < CR.z.size(); ++i) {
                        merged.z.push_back(CR.z[i] + best.translation);
                        merged.mu.push_back(CR.mu[i]);
                    }
                    detail::bridge_join(merged.z, merged.mu, CL.z.back(),
                                        CR.z.front() + best.translation, c.e);
                    // recentre the local frame at the deepest sample
                    double zc =
                        merged.z[std::min_element(merged.mu.begin(), merged.mu.end()) -
                                 merged.mu.begin()];
                    for (auto& zv : merged.z) zv -= zc;
                    Assembly::Cand mirrored;
                    for (std::size_t i = merged.z.size(); i-- > 0;) {
                        mirrored.z.push_back(-merged.z[i]);
                        mirrored.mu.push_back(merged.mu[i]);
                    }
                    merged.sigma_birth = +1;
                    mirrored.sigma_birth = -1;
                    M.candidates = {merged, mirrored};
                    res.steps.push_back({k, "multiwell-join", best.mismatch});
                    // merged ladder state
                    LiveLadder Ml;
                    Ml.half = false;
                    Ml.assembly = static_cast<int>(assemblies.size());
                    Ml.newborn = false;
                    Ml.e_prev_top = c.e;
                    Ml.s0_top = detail::s0_extrapolate(live[la], c.e) +
                                detail::s0_extrapolate(live[lb], c.e);
                    Ml.t_top = live[la].t_top + live[lb].t_top;
                    for (const auto& src : {live[la].last_e, live[lb].last_e})
                        for (auto& [si, le] : src) {
                            auto it = Ml.last_e.find(si);
                            if (it == Ml.last_e.end() || le > it->second) Ml.last_e[si] = le;
                        }
                    assemblies.push_back(std::move(M));
                    // erase the two merged ladders (higher index first)
                    live.erase(live.begin() + std::max(la, lb));
                    live.erase(live.begin() + std::min(la, lb));
                    live.push_back(Ml);
                }
            }
        }

        // --- separate the band's eigenvalues, per h ---
        const int L = static_cast<int>(live.size());
        std::vector<std::vector<LadderData>> per_ladder(L);
        for (std::size_t si = 0; si < spectra.size(); ++si) {
            const auto& s = spectra[si];
            std::vector<double> eigs;
            for (double e : s.eigenvalues)
                if (e > lo && e <= hi) eigs.push_back(e);
            if (eigs.empty()) continue;
            std::vector<LadderContext> ctx(L);
            for (int l = 0; l < L; ++l) {
                double t_eff = std::max(live[l].t_top, 1e-9);
                if (live[l].half && live[l].t_top <= 0.0) {
                    // first band: no period context yet; estimate from the
                    // local mean gap
                    double mean_gap = (eigs.back() - eigs.front()) /
                                      std::max<std::size_t>(eigs.size() - 1, 1);
                    t_eff = 2.0 * pi * s.h / mean_gap;
                }
                double sp = 2.0 * pi * s.h / t_eff;
                ctx[l].spacing = sp;
                auto it = live[l].last_e.find(static_cast<int>(si));
                ctx[l].first_expected = it != live[l].last_e.end() ? it->second + sp
                                                                   : lo + 0.5 * sp;
            }
            auto sep = separate_clusters(eigs, lo, hi, s.h, ctx, opts.separate);
            for (int l = 0; l < L; ++l) {
                if (sep.ladders[l].size() < 2) continue;
                LadderData ld;
                ld.h = s.h;
                ld.eigenvalues = sep.ladders[l];
                ld.alpha0 = detail::anchor_alpha(live[l], ld.eigenvalues.front(), s.h);
                per_ladder[l].push_back(std::move(ld));
                live[l].last_e[static_cast<int>(si)] = sep.ladders[l].back();
            }
        }

        // --- fit actions and reconstruct ---
        // half well first: it anchors the band's monotone extension
        {
            if (per_ladder[0].empty())
                throw reconstruction_error("band " + std::to_string(k) +
                                           ": no half-well ladder data");
            ActionsFromSpectrumOpts ao;
            auto fit = actions_from_spectrum(per_ladder[0], lo, hi, true, ao);
            const auto& T = fit.table;
            CubicSpline s0s(T.E, T.S0);
            CubicSpline state_mu = zs.size() >= 4 ? CubicSpline(zs, mus) : CubicSpline();
            auto a_known = [&](double E) {
                if (zs.size() < 4) return 0.0;
                return region_area(state_mu, z_deep, 0.0, E);
            };
            auto raw_new = [&](double E) {
                double tot = 0.25 * s0s.eval(std::clamp(E, T.E.front(), T.E.back()), 0);
                return std::max(tot - a_known(E), 0.0);
            };
            // the ladder does not reach the band bottom; bridge the gap with
            // the anchored (E-lo)^{3/2} local model fitted to the lowest data
            double e_data = T.E.front();
            std::vector<double> fx, fy;
            for (int q = 0; q < 10; ++q) {
                double E = e_data + q * 0.03 * (T.band_hi - e_data);
                double w = E - lo;
                if (w <= 0) continue;
                fx.push_back(w);
                fy.push_back(raw_new(E) / (w * std::sqrt(w)));
            }
            auto cf = polyfit(fx, fy, 1);
            auto area_val = [&](double E) {
                if (E >= e_data) return raw_new(E);
                double w = std::max(E - lo, 0.0);
                return std::max(polyval(cf, w), 0.0) * w * std::sqrt(w);
            };
            auto area_new = BandFunction::sample(lo, T.band_hi, area_val,
                                                 EndBehavior::sqrt_zero, 160, 2e-4);
            auto mr = reconstruct_monotone(area_new, lo, z_deep);
            detail::prepend_segment(zs, mus, mr.seg);
            z_deep = zs.front();
            res.steps.push_back({k, k == 1 ? "monotone" : "half-extension", fit.max_residual});
            // continuation state; stay clear of the top grid point where the
            // period can be edge-inflated
            std::size_t ic = T.E.size() >= 4 ? T.E.size() - 3 : T.E.size() - 1;
            live[0].s0_top = T.S0[ic];
            live[0].e_prev_top = T.E[ic];
            live[0].t_top = T.T[ic];
        }
        // wells
        for (int l = 1; l < L; ++l) {
            if (per_ladder[l].empty())
                throw reconstruction_error("band " + std::to_string(k) +
                                           ": no data for a separated well");
            if (leading_only)
                throw reconstruction_error(
                    "band " + std::to_string(k) +
                    ": separated wells need at least two h values (S2 unavailable)");
            auto fit = actions_from_spectrum(per_ladder[l], lo, hi, false);
            if (live[l].newborn) {
                auto wr = reconstruct_separated_well(fit.table, live[l].birth_e,
                                                     live[l].birth_curv, opts.well);
                Assembly A;
                A.e_bottom = live[l].birth_e;
                A.e_top = fit.table.band_hi;
                for (const auto& c : wr.candidates) {
                    Assembly::Cand cand;
                    cand.z = c.shape.z;
                    cand.mu = c.shape.mu;
                    cand.sigma_birth = c.sigma;
                    A.candidates.push_back(std::move(cand));
                }
                live[l].assembly = static_cast<int>(assemblies.size());
                live[l].newborn = false;
                assemblies.push_back(std::move(A));
                res.steps.push_back({k, "separated-well", fit.max_residual});
            } else {
                Assembly& A = assemblies[live[l].assembly];
                for (auto& cand : A.candidates)
                    reconstruct_multiwell_band(cand, fit.table, lo, opts.well);
                A.e_top = fit.table.band_hi;
                res.steps.push_back({k, "well-extension", fit.max_residual});
            }
            std::size_t ic = fit.table.E.size() >= 4 ? fit.table.E.size() - 3
                                                      : fit.table.E.size() - 1;
            live[l].s0_top = fit.table.S0[ic];
            live[l].e_prev_top = fit.table.E[ic];
            live[l].t_top = fit.table.T[ic];
        }
    }

    // --- place any remaining floating assemblies at the top of the data ---
    for (auto& l : live) {
        if (l.half || l.assembly < 0) continue;
        if (!assemblies[l.assembly].placed) {
            double mm = place_assembly(l.assembly, det.e_cap);
            res.steps.push_back({K, "glue", mm});
        }
    }

    // --- deep closure: extend the flank to the estimated floor, then flat ---
    if (zs.size() < 4) throw reconstruction_error("pipeline produced no profile");
    {
        CubicSpline sp(zs, mus);
        double slope = sp.eval(zs.front() + 1e-9, 1);
        double mu_deep = mus.front();
        double mu_cap = std::max(det.mu_I_est, mu_deep);
        if (slope < -1e-9 && mu_cap > mu_deep) {
            double dz_ext = std::min((mu_cap - mu_deep) / (-slope), 0.5 * (zs.back() - zs.front()));
            zs.insert(zs.begin(), zs.front() - dz_ext);
            mus.insert(mus.begin(), std::min(mu_deep - slope * dz_ext, mu_cap));
        }
        res.steps.push_back({K, "deep-tail", 0.0});
    }

    // resample onto a clean grid and package as a Profile
    {
        CubicSpline sp(zs, mus);
        double zI = zs.front();
        auto grid = linspace(zI, 0.0, opts.profile_samples);
        std::vector<double> m(grid.size());
        double mu_max = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            m[i] = sp.eval(grid[i], 0);
            mu_max = std::max(mu_max, m[i]);
        }
        m.front() = mu_max;  // floor value by construction
        res.profile = std::make_shared<SampledProfile>(grid, m, mu_max, false);
    }

    if (truth) {
        double sup = 0.0;
        double zlo = std::min(truth->z_min(), res.profile->z_min());
        for (int i = 0; i <= 2000; ++i) {
            double Z = zlo + (0.0 - zlo) * i / 2000.0;
            sup = std::max(sup, std::abs(res.profile->value(Z) - truth->value(Z)));
        }
        res.sup_error = sup;
    }
    return res;
}

}  // namespace specwell
