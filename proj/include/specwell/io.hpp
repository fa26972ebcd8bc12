#pragma once

#include <fstream>
#include <map>
#include <memory>
#include <string>

#include <json.hpp>

#include "specwell/actions.hpp"
#include "specwell/common.hpp"
#include "specwell/presets.hpp"
#include "specwell/profile.hpp"
#include "specwell/reconstruct.hpp"
#include "specwell/sturm.hpp"
#include "specwell/transforms.hpp"

namespace specwell {

using nlohmann::json;

// Profile file: {"z_min", "grid", "mu", "mu_I"}; synth adds "preset"/"params"
// so analytic presets reload exactly instead of through their samples.

inline json profile_to_json(const SampledProfile& p, const std::string& preset = "",
                            const std::map<std::string, double>& params = {}) {
    json j;
    j["z_min"] = p.z_min();
    j["grid"] = p.grid();
    j["mu"] = p.mu();
    j["mu_I"] = p.mu_I();
    if (!preset.empty()) {
        j["preset"] = preset;
        j["params"] = params;
    }
    return j;
}

inline std::unique_ptr<ProfileModel> profile_from_json(const json& j) {
    if (j.contains("preset")) {
        std::map<std::string, double> params;
        if (j.contains("params"))
            for (auto& [k, v] : j.at("params").items()) params[k] = v.get<double>();
        return presets::make(j.at("preset").get<std::string>(), params);
    }
    auto grid = j.at("grid").get<std::vector<double>>();
    auto mu = j.at("mu").get<std::vector<double>>();
    double mu_I = j.at("mu_I").get<double>();
    return std::make_unique<SampledProfile>(std::move(grid), std::move(mu), mu_I);
}

// Spectrum file: {"h", "eigenvalues", "labels"|null, "provenance"}.

inline json spectrum_to_json(const SpectralData& s) {
    json j;
    j["h"] = s.h;
    j["eigenvalues"] = s.eigenvalues;
    if (s.labeled()) j["labels"] = s.labels;
    else j["labels"] = nullptr;
    if (!s.alphas.empty()) j["alphas"] = s.alphas;
    j["provenance"] = s.provenance;
    return j;
}

inline SpectralData spectrum_from_json(const json& j) {
    SpectralData s;
    s.h = j.at("h").get<double>();
    s.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
    if (j.contains("labels") && !j.at("labels").is_null())
        s.labels = j.at("labels").get<std::vector<int>>();
    if (j.contains("alphas")) s.alphas = j.at("alphas").get<std::vector<int>>();
    s.provenance = j.value("provenance", "numeric");
    return s;
}

// ActionTable file: {"well": id, "band": [lo,hi], "E", "S0", "S2"|null, "T"}.

inline json action_table_to_json(const ActionTable& t) {
    json j;
    j["well"] = t.j;
    j["band"] = {t.band_lo, t.band_hi};
    j["E"] = t.E;
    j["S0"] = t.S0;
    if (t.has_s2()) j["S2"] = t.S2;
    else j["S2"] = nullptr;
    j["T"] = t.T;
    j["half"] = t.half;
    return j;
}

inline ActionTable action_table_from_json(const json& j) {
    ActionTable t;
    t.j = j.value("well", 0);
    t.band_lo = j.at("band")[0].get<double>();
    t.band_hi = j.at("band")[1].get<double>();
    t.E = j.at("E").get<std::vector<double>>();
    t.S0 = j.at("S0").get<std::vector<double>>();
    if (j.contains("S2") && !j.at("S2").is_null())
        t.S2 = j.at("S2").get<std::vector<double>>();
    t.T = j.at("T").get<std::vector<double>>();
    t.half = j.value("half", false);
    return t;
}

// BandFunction file: {"band": [lo,hi], "E", "values", "tag"}.

inline json band_function_to_json(const BandFunction& f) {
    json j;
    j["band"] = {f.lo(), f.hi()};
    j["E"] = f.grid();
    j["values"] = f.values();
    j["tag"] = to_string(f.tag());
    return j;
}

inline BandFunction band_function_from_json(const json& j) {
    return BandFunction(j.at("band")[0].get<double>(), j.at("band")[1].get<double>(),
                        j.at("E").get<std::vector<double>>(),
                        j.at("values").get<std::vector<double>>(),
                        end_behavior_from_string(j.at("tag").get<std::string>()));
}

// ReconstructionResult file: reconstructed profile plus per-step diagnostics.

inline json reconstruction_to_json(const ReconstructionResult& r) {
    json j;
    j["profile"] = profile_to_json(*r.profile);
    json steps = json::array();
    for (const auto& s : r.steps)
        steps.push_back({{"band", s.band}, {"method", s.method}, {"residual", s.residual}});
    j["steps"] = steps;
    j["sigmas"] = r.sigmas;
    j["translations"] = r.translations;
    if (std::isfinite(r.sup_error)) j["sup_error"] = r.sup_error;
    json det;
    det["e0"] = r.detected.e0;
    det["e_cap"] = r.detected.e_cap;
    json crit = json::array();
    for (const auto& c : r.detected.criticals)
        crit.push_back({{"e", c.e},
                        {"kind", c.minimum ? "min" : "max"},
                        {"curvature", c.curvature}});
    det["criticals"] = crit;
    j["detected"] = det;
    return j;
}

inline json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open " + path);
    json j;
    in >> j;
    return j;
}

inline void save_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw input_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

inline void save_csv(const std::string& path, const std::vector<std::string>& header,
                     const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path);
    if (!out) throw input_error("cannot write " + path);
    for (std::size_t i = 0; i < header.size(); ++i)
        out << header[i] << (i + 1 < header.size() ? "," : "\n");
    char buf[32];
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", r[i]);
            out << buf << (i + 1 < r.size() ? "," : "\n");
        }
    }
}

}  // namespace specwell
