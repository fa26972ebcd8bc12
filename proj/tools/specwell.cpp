// specwell: batch front end for the forward/quantize/invert pipelines.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "specwell/io.hpp"
#include "specwell/presets.hpp"
#include "specwell/quantize.hpp"
#include "specwell/reconstruct.hpp"
#include "specwell/sturm.hpp"

using namespace specwell;

namespace {

int run(int argc, char** argv) {
    CLI::App app{"semiclassical spectral engine for the Love-wave operator"};
    app.require_subcommand(1);

    unsigned threads = 0;
    app.add_option("--threads", threads, "cap worker threads (0 = auto)");

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "write a preset profile file");
    std::string preset, out_path = "profile.json";
    std::vector<std::string> param_kv;
    int grid_samples = 801;
    synth->add_option("--preset", preset, "preset name")->required();
    synth->add_option("--out", out_path, "output path");
    synth->add_option("--param", param_kv, "preset parameter name=value (repeatable)");
    synth->add_option("--m1", param_kv, "")->group("");  // layer shorthands below
    synth->add_option("--samples", grid_samples, "number of profile samples");
    double m1 = -1, m2 = -1, H = -1;
    synth->add_option("--layer-m1", m1, "layer: top wavespeed^2")->group("layer");
    synth->add_option("--layer-m2", m2, "layer: halfspace wavespeed^2")->group("layer");
    synth->add_option("--layer-H", H, "layer: thickness")->group("layer");

    // ---- forward ----
    auto* forward = app.add_subcommand("forward", "solve the half-line eigenproblem");
    std::string profile_path, spec_out = "spectrum.json";
    double h_single = 0.0;
    int grid_n = 0;
    forward->add_option("--profile", profile_path, "profile JSON")->required();
    forward->add_option("--h", h_single, "semiclassical parameter")->required();
    forward->add_option("--out", spec_out, "output spectrum path");
    forward->add_option("--grid-n", grid_n, "override spatial grid size");

    // ---- quantize ----
    auto* quant = app.add_subcommand("quantize", "Bohr-Sommerfeld predicted spectrum");
    std::string qprofile, qout = "bs_spectrum.json";
    double qh = 0.0;
    int order = 2;
    quant->add_option("--profile", qprofile, "profile JSON")->required();
    quant->add_option("--h", qh, "semiclassical parameter")->required();
    quant->add_option("--order", order, "0 = leading + Maslov, 2 = with S2")
        ->check(CLI::IsMember({0, 2}));
    quant->add_option("--out", qout, "output spectrum path");

    // ---- invert ----
    auto* invert = app.add_subcommand("invert", "reconstruct the profile from spectra");
    std::vector<std::string> spec_paths;
    std::string rec_out = "reconstruction.json", rec_csv, truth_path;
    invert->add_option("spectra", spec_paths, "spectrum JSON files (one per h)")->required();
    invert->add_option("--out", rec_out, "reconstruction JSON");
    invert->add_option("--csv", rec_csv, "CSV of (Z, mu_rec[, mu_true])");
    invert->add_option("--truth", truth_path, "profile JSON for residual reporting");

    // ---- compare ----
    auto* cmp = app.add_subcommand("compare", "sup/L2 distance between profiles");
    std::string pa, pb, cmp_out;
    cmp->add_option("--a", pa, "profile JSON")->required();
    cmp->add_option("--b", pb, "profile JSON")->required();
    cmp->add_option("--out", cmp_out, "optional JSON report path");

    // ---- trace-check ----
    auto* trc = app.add_subcommand("trace-check", "trace-formula identity check");
    std::string tprofile, trc_csv;
    double th = 0.01;
    int mmax = 20;
    trc->add_option("--profile", tprofile, "profile JSON")->required();
    trc->add_option("--h", th, "semiclassical parameter");
    trc->add_option("--mmax", mmax, "trace truncation order");
    trc->add_option("--csv", trc_csv, "CSV of (m, partial_rhs)");

    CLI11_PARSE(app, argc, argv);
    worker_cap = threads;

    if (*synth) {
        std::map<std::string, double> params;
        for (const auto& kv : param_kv) {
            auto eq = kv.find('=');
            if (eq == std::string::npos) throw input_error("--param expects name=value");
            params[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
        }
        if (m1 > 0) params["m1"] = m1;
        if (m2 > 0) params["m2"] = m2;
        if (H > 0) params["H"] = H;
        auto model = presets::make(preset, params);
        auto sp = sample_profile(*model, grid_samples, preset != "constant");
        save_json(out_path, profile_to_json(*sp, preset, params));
        return 0;
    }
    if (*forward) {
        if (h_single <= 0) throw input_error("--h must be positive");
        auto model = profile_from_json(load_json(profile_path));
        SturmOpts opts;
        opts.grid_n = grid_n;
        auto s = solve_halfline(*model, h_single, opts);
        save_json(spec_out, spectrum_to_json(s));
        return 0;
    }
    if (*quant) {
        if (qh <= 0) throw input_error("--h must be positive");
        auto model = profile_from_json(load_json(qprofile));
        SemiclassicalOpts opts;
        opts.bs.order = order;
        auto res = semiclassical_spectrum(*model, qh, opts);
        save_json(qout, spectrum_to_json(res.spectrum));
        return 0;
    }
    if (*invert) {
        std::vector<SpectralData> spectra;
        for (const auto& path : spec_paths) spectra.push_back(spectrum_from_json(load_json(path)));
        ReconstructOpts opts;
        std::unique_ptr<ProfileModel> truth;
        if (!truth_path.empty()) truth = profile_from_json(load_json(truth_path));
        auto rec = full_pipeline(spectra, opts, truth.get());
        save_json(rec_out, reconstruction_to_json(rec));
        std::printf("%-18s %-22s %s\n", "band", "method", "residual");
        for (const auto& st : rec.steps)
            std::printf("%-18d %-22s %.6g\n", st.band, st.method.c_str(), st.residual);
        if (truth) std::printf("sup |mu_rec - mu_true| = %.6g\n", rec.sup_error);
        if (!rec_csv.empty()) {
            std::vector<std::vector<double>> rows;
            auto& pr = *rec.profile;
            for (std::size_t i = 0; i < pr.grid().size(); ++i) {
                std::vector<double> row{pr.grid()[i], pr.mu()[i]};
                if (truth) row.push_back(truth->value(pr.grid()[i]));
                rows.push_back(row);
            }
            save_csv(rec_csv, truth ? std::vector<std::string>{"Z", "mu_rec", "mu_true"}
                                    : std::vector<std::string>{"Z", "mu_rec"},
                     rows);
        }
        return 0;
    }
    if (*cmp) {
        auto a = profile_from_json(load_json(pa));
        auto b = profile_from_json(load_json(pb));
        double zlo = std::max(a->z_min(), b->z_min());
        double sup = 0.0, l2 = 0.0;
        int n = 2001;
        for (int i = 0; i < n; ++i) {
            double Z = zlo + (0.0 - zlo) * i / (n - 1);
            double d = std::abs(a->value(Z) - b->value(Z));
            sup = std::max(sup, d);
            l2 += d * d;
        }
        l2 = std::sqrt(l2 * (0.0 - zlo) / n);
        json j;
        j["sup"] = sup;
        j["l2"] = l2;
        std::printf("sup = %.17g\nl2  = %.17g\n", sup, l2);
        if (!cmp_out.empty()) save_json(cmp_out, j);
        return 0;
    }
    if (*trc) {
        auto model = profile_from_json(load_json(tprofile));
        auto cs = critical_structure(*model);
        auto edges = cs.band_edges();
        // first band, bump in the middle of it
        double lo = edges[0], hi = std::min(edges[1], cs.mu_I - 0.02 * (cs.mu_I - cs.e0));
        auto dec = decompose(*model, 1, cs);
        std::vector<ActionTable> tabs;
        tabs.push_back(build_action_table_half(*model, dec.half, 1, 0, lo, hi));
        double c = 0.5 * (lo + hi), w = 0.3 * (hi - lo);
        auto res = trace_check(tabs, th, mmax, bump_function(c, w), c - w, c + w);
        std::printf("lhs = %.12g\nrhs = %.12g\nresidual = %.3e\n", res.lhs, res.rhs,
                    res.residual);
        if (!trc_csv.empty()) {
            std::vector<std::vector<double>> rows;
            for (auto [m, v] : res.partial)
                rows.push_back({static_cast<double>(m), v});
            save_csv(trc_csv, {"m", "partial_rhs"}, rows);
        }
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const input_error& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 1;
    } catch (const reconstruction_error& e) {
        std::cerr << "reconstruction error: " << e.what() << "\n";
        return 3;
    } catch (const numeric_error& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
