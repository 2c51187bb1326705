#pragma once

#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "mftk/cascade.hpp"
#include "mftk/errors.hpp"
#include "mftk/mmpp.hpp"
#include "mftk/netsim.hpp"

namespace mftk {

inline constexpr const char* kCascadeSchema = "mftk-cascade-1";
inline constexpr const char* kMmppSchema = "mftk-mmpp-1";

inline nlohmann::ordered_json to_json(const CascadeModel& m) {
    nlohmann::ordered_json j;
    j["schema"] = kCascadeSchema;
    j["n"] = m.n;
    j["target_mean"] = m.target_mean;
    j["target_cv2"] = m.target_cv2;
    j["hurst"] = m.hurst;
    j["dist_family"] =
        m.dist_family == DistFamily::lognormal ? "lognormal" : "deterministic";
    auto factors = nlohmann::ordered_json::array();
    for (const auto& f : m.factors)
        factors.push_back({{"mean", f.mean}, {"cv2", f.cv2}});
    j["factors"] = std::move(factors);
    if (m.bounds)
        j["bounds"] = {{"lo", m.bounds->first}, {"hi", m.bounds->second}};
    if (m.fit) {
        nlohmann::ordered_json fit;
        fit["stats"] = {{"mean", m.fit->stats.mean},
                        {"variance", m.fit->stats.variance},
                        {"cv2", m.fit->stats.cv2}};
        if (m.fit->hurst_estimate)
            fit["hurst_estimate"] = {{"hurst", m.fit->hurst_estimate->hurst},
                                     {"beta", m.fit->hurst_estimate->beta},
                                     {"r2", m.fit->hurst_estimate->r2}};
        if (m.fit->n_min) fit["n_min"] = *m.fit->n_min;
        fit["ergodic"] = m.fit->ergodic;
        fit["solver_iterations"] = m.fit->solver_iterations;
        fit["max_rel_residual"] = m.fit->max_rel_residual;
        fit["residuals"] = m.fit->residuals;
        fit["warnings"] = m.fit->warnings;
        j["fit"] = std::move(fit);
    }
    return j;
}

inline CascadeModel cascade_from_json(const nlohmann::json& j) {
    if (j.value("schema", "") != kCascadeSchema)
        throw ParseError("not a cascade model file (schema mismatch)");
    CascadeModel m;
    m.n = j.at("n").get<int>();
    m.target_mean = j.at("target_mean").get<double>();
    m.target_cv2 = j.at("target_cv2").get<double>();
    m.hurst = j.at("hurst").get<double>();
    m.dist_family = j.at("dist_family").get<std::string>() == "lognormal"
                        ? DistFamily::lognormal
                        : DistFamily::deterministic;
    for (const auto& f : j.at("factors"))
        m.factors.push_back(
            {f.at("mean").get<double>(), f.at("cv2").get<double>()});
    if (j.contains("bounds"))
        m.bounds = std::make_pair(j["bounds"].at("lo").get<double>(),
                                  j["bounds"].at("hi").get<double>());
    if (j.contains("fit")) {
        FitInfo info;
        const auto& fit = j["fit"];
        info.stats.mean = fit.at("stats").at("mean").get<double>();
        info.stats.variance = fit.at("stats").at("variance").get<double>();
        info.stats.cv2 = fit.at("stats").at("cv2").get<double>();
        if (fit.contains("hurst_estimate"))
            info.hurst_estimate = HurstEstimateInfo{
                fit["hurst_estimate"].at("hurst").get<double>(),
                fit["hurst_estimate"].at("beta").get<double>(),
                fit["hurst_estimate"].at("r2").get<double>()};
        if (fit.contains("n_min")) info.n_min = fit["n_min"].get<int>();
        info.ergodic = fit.value("ergodic", true);
        info.solver_iterations = fit.value("solver_iterations", 0);
        info.max_rel_residual = fit.value("max_rel_residual", 0.0);
        if (fit.contains("residuals"))
            info.residuals = fit["residuals"].get<std::vector<double>>();
        if (fit.contains("warnings"))
            info.warnings = fit["warnings"].get<std::vector<std::string>>();
        m.fit = std::move(info);
    }
    m.validate();
    return m;
}

inline nlohmann::ordered_json to_json(const MmppModel& m) {
    nlohmann::ordered_json j;
    j["schema"] = kMmppSchema;
    j["n_states"] = m.n_states;
    j["rates"] = m.rates;
    j["transitions"] = m.transitions;
    j["initial"] = m.initial;
    nlohmann::ordered_json meta;
    meta["method"] = m.meta.method;
    meta["requested_states"] = m.meta.requested_states;
    meta["change_points"] = m.meta.change_points;
    meta["scene_classes"] = m.meta.scene_classes;
    meta["warnings"] = m.meta.warnings;
    j["meta"] = std::move(meta);
    return j;
}

inline MmppModel mmpp_from_json(const nlohmann::json& j) {
    if (j.value("schema", "") != kMmppSchema)
        throw ParseError("not an mmpp model file (schema mismatch)");
    MmppModel m;
    m.n_states = j.at("n_states").get<int>();
    m.rates = j.at("rates").get<std::vector<double>>();
    m.transitions =
        j.at("transitions").get<std::vector<std::vector<double>>>();
    m.initial = j.at("initial").get<std::vector<double>>();
    if (j.contains("meta")) {
        const auto& meta = j["meta"];
        m.meta.method = meta.value("method", "");
        m.meta.requested_states = meta.value("requested_states", 0);
        if (meta.contains("change_points"))
            m.meta.change_points =
                meta["change_points"].get<std::vector<std::uint64_t>>();
        m.meta.scene_classes = meta.value("scene_classes", 0);
        if (meta.contains("warnings"))
            m.meta.warnings = meta["warnings"].get<std::vector<std::string>>();
    }
    m.validate();
    return m;
}

inline nlohmann::ordered_json to_json(const NetworkConfig& c) {
    return {{"link_rate", c.link_rate},
            {"shaper_capacity", c.shaper_capacity},
            {"switch_in_capacity", c.switch_in_capacity},
            {"switch_out_capacity", c.switch_out_capacity},
            {"mtu_payload", c.mtu_payload},
            {"per_packet_overhead", c.per_packet_overhead},
            {"min_payload", c.min_payload},
            {"frame_rate", c.frame_rate}};
}

inline NetworkConfig network_config_from_json(const nlohmann::json& j) {
    NetworkConfig c;
    c.link_rate = j.value("link_rate", c.link_rate);
    c.shaper_capacity = j.value("shaper_capacity", c.shaper_capacity);
    c.switch_in_capacity = j.value("switch_in_capacity", c.switch_in_capacity);
    c.switch_out_capacity =
        j.value("switch_out_capacity", c.switch_out_capacity);
    c.mtu_payload = j.value("mtu_payload", c.mtu_payload);
    c.per_packet_overhead =
        j.value("per_packet_overhead", c.per_packet_overhead);
    c.min_payload = j.value("min_payload", c.min_payload);
    c.frame_rate = j.value("frame_rate", c.frame_rate);
    c.validate();
    return c;
}

inline void save_json(const nlohmann::ordered_json& j,
                      const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failed for '" + path + "'");
}

inline nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("invalid JSON in '" + path + "': " + e.what());
    }
    return j;
}

} // namespace mftk
