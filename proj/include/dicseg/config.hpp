#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dicseg/error.hpp"
#include "dicseg/filters.hpp"
#include "dicseg/segmentation.hpp"

namespace dicseg {

enum class RunMode { Batch, Single };

/// Hand-tuned band-pass and threshold for one frame.
struct FrameOverride {
    double d1 = 0.0;
    double d2 = 0.0;
    double threshold = 0.0;

    BandPassParams bandpass() const { return {d1, d2}; }
    friend bool operator==(const FrameOverride&, const FrameOverride&) = default;
};

struct PipelineConfig {
    RunMode mode = RunMode::Batch;
    std::string pattern = "*.png";
    double interval = 10.0;  // minutes between frames
    FlatFieldParams flat_field{};
    GNeighborParams g_neighbor{};
    int kuwahara_window = 5;
    int stddev_window = 3;
    std::optional<BandPassParams> bandpass;
    double threshold = 0.1;
    MorphologyPlan morphology = MorphologyPlan::standard();
    int speck_min_area = 0;  // 0 disables speck removal
    double spread_fraction = 0.95;
    std::map<int, FrameOverride> frame_overrides;

    friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;

    void validate() const {
        auto fail = [](const std::string& msg) { throw ConfigError(msg); };
        if (pattern.empty()) fail("pattern must not be empty");
        if (!(interval > 0.0) || !std::isfinite(interval)) fail("interval must be positive");
        if (!(threshold >= 0.0 && threshold <= 1.0)) fail("threshold must lie in [0,1]");
        if (kuwahara_window < 5 || kuwahara_window % 2 == 0) {
            fail("kuwahara_window must be odd and >= 5");
        }
        if (stddev_window < 3 || stddev_window % 2 == 0) fail("stddev_window must be odd and >= 3");
        if (speck_min_area < 0) fail("speck_min_area must be >= 0");
        if (!(spread_fraction > 0.0 && spread_fraction <= 1.0)) {
            fail("spread_fraction must lie in (0,1]");
        }
        try {
            flat_field.validate();
            g_neighbor.validate();
            if (bandpass) bandpass->validate();
            morphology.validate();
        } catch (const ParameterError& e) {
            fail(e.what());
        }
        for (const auto& [idx, o] : frame_overrides) {
            if (idx < 0) fail("frame_overrides keys must be non-negative frame indices");
            try {
                o.bandpass().validate();
            } catch (const ParameterError& e) {
                fail("frame_overrides[" + std::to_string(idx) + "]: " + e.what());
            }
            if (!(o.threshold >= 0.0 && o.threshold <= 1.0)) {
                fail("frame_overrides[" + std::to_string(idx) + "]: threshold must lie in [0,1]");
            }
        }
        if (mode == RunMode::Batch && !frame_overrides.empty()) {
            fail("frame_overrides apply to single-frame runs only");
        }
    }

    /// The effective morphology: speck removal (when enabled) runs first.
    MorphologyPlan effective_plan() const {
        if (speck_min_area <= 0) return morphology;
        MorphologyPlan plan;
        plan.steps.push_back(MorphStep::remove_specks(speck_min_area));
        plan.steps.insert(plan.steps.end(), morphology.steps.begin(), morphology.steps.end());
        return plan;
    }
};

// ---------------------------------------------------------------------------
// JSON mapping
// ---------------------------------------------------------------------------

using json = nlohmann::json;

inline json to_json(const MorphologyPlan& plan) {
    json steps = json::array();
    for (const auto& s : plan.steps) {
        json j{{"op", to_string(s.op)}};
        if (s.op == MorphOp::Close || s.op == MorphOp::Erode) j["radius"] = s.value;
        if (s.op == MorphOp::RemoveSpecks) j["min_area"] = s.value;
        steps.push_back(std::move(j));
    }
    return steps;
}

inline json overrides_to_json(const std::map<int, FrameOverride>& overrides) {
    json j = json::object();
    for (const auto& [idx, o] : overrides) {
        j[std::to_string(idx)] = {{"d1", o.d1}, {"d2", o.d2}, {"threshold", o.threshold}};
    }
    return j;
}

inline json to_json(const PipelineConfig& c) {
    json j;
    j["mode"] = c.mode == RunMode::Batch ? "batch" : "single";
    j["pattern"] = c.pattern;
    j["interval"] = c.interval;
    j["flat_field"] = {{"sigma_small", c.flat_field.sigma_small},
                       {"sigma_large", c.flat_field.sigma_large}};
    j["g_neighbor"] = {{"threshold_override", c.g_neighbor.threshold_override
                                                  ? json(*c.g_neighbor.threshold_override)
                                                  : json(nullptr)}};
    j["kuwahara_window"] = c.kuwahara_window;
    j["stddev_window"] = c.stddev_window;
    j["bandpass"] = c.bandpass ? json{{"d1", c.bandpass->d1}, {"d2", c.bandpass->d2}} : json(nullptr);
    j["threshold"] = c.threshold;
    j["morphology"] = to_json(c.morphology);
    j["speck_min_area"] = c.speck_min_area;
    j["spread_fraction"] = c.spread_fraction;
    j["frame_overrides"] = overrides_to_json(c.frame_overrides);
    return j;
}

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<const char*> known,
                           const std::string& where) {
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

template <typename T>
T get_as(const json& j, const char* key, const std::string& where) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

inline FrameOverride override_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    reject_unknown(j, {"d1", "d2", "threshold"}, where);
    return {get_as<double>(j, "d1", where), get_as<double>(j, "d2", where),
            get_as<double>(j, "threshold", where)};
}

}  // namespace detail

inline MorphologyPlan plan_from_json(const json& j) {
    if (!j.is_array()) throw ConfigError("morphology must be an array of steps");
    MorphologyPlan plan;
    for (const auto& s : j) {
        if (!s.is_object() || !s.contains("op")) throw ConfigError("morphology step needs an 'op'");
        const auto op = morph_op_from_string(detail::get_as<std::string>(s, "op", "morphology"));
        switch (op) {
            case MorphOp::Close:
            case MorphOp::Erode:
                detail::reject_unknown(s, {"op", "radius"}, "morphology step");
                plan.steps.push_back({op, detail::get_as<int>(s, "radius", "morphology")});
                break;
            case MorphOp::RemoveSpecks:
                detail::reject_unknown(s, {"op", "min_area"}, "morphology step");
                plan.steps.push_back({op, detail::get_as<int>(s, "min_area", "morphology")});
                break;
            default:
                detail::reject_unknown(s, {"op"}, "morphology step");
                plan.steps.push_back({op, 0});
        }
    }
    return plan;
}

inline std::map<int, FrameOverride> overrides_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("frame_overrides must be an object keyed by frame index");
    std::map<int, FrameOverride> out;
    for (const auto& [key, value] : j.items()) {
        std::size_t used = 0;
        int idx = -1;
        try {
            idx = std::stoi(key, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != key.size() || idx < 0) {
            throw ConfigError("frame_overrides key '" + key + "' is not a frame index");
        }
        out[idx] = detail::override_from_json(value, "frame_overrides." + key);
    }
    return out;
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline PipelineConfig config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
    detail::reject_unknown(j,
                           {"mode", "pattern", "interval", "flat_field", "g_neighbor",
                            "kuwahara_window", "stddev_window", "bandpass", "threshold",
                            "morphology", "speck_min_area", "spread_fraction", "frame_overrides"},
                           "configuration");
    PipelineConfig c;
    const std::string top = "config";
    if (j.contains("mode")) {
        const auto m = detail::get_as<std::string>(j, "mode", top);
        if (m == "batch") {
            c.mode = RunMode::Batch;
        } else if (m == "single") {
            c.mode = RunMode::Single;
        } else {
            throw ConfigError("mode must be 'batch' or 'single', got '" + m + "'");
        }
    }
    if (j.contains("pattern")) c.pattern = detail::get_as<std::string>(j, "pattern", top);
    if (j.contains("interval")) c.interval = detail::get_as<double>(j, "interval", top);
    if (j.contains("flat_field")) {
        const auto& f = j.at("flat_field");
        detail::reject_unknown(f, {"sigma_small", "sigma_large"}, "flat_field");
        if (f.contains("sigma_small")) c.flat_field.sigma_small = detail::get_as<double>(f, "sigma_small", "flat_field");
        if (f.contains("sigma_large")) c.flat_field.sigma_large = detail::get_as<double>(f, "sigma_large", "flat_field");
    }
    if (j.contains("g_neighbor")) {
        const auto& g = j.at("g_neighbor");
        detail::reject_unknown(g, {"threshold_override"}, "g_neighbor");
        if (g.contains("threshold_override") && !g.at("threshold_override").is_null()) {
            c.g_neighbor.threshold_override = detail::get_as<double>(g, "threshold_override", "g_neighbor");
        }
    }
    if (j.contains("kuwahara_window")) c.kuwahara_window = detail::get_as<int>(j, "kuwahara_window", top);
    if (j.contains("stddev_window")) c.stddev_window = detail::get_as<int>(j, "stddev_window", top);
    if (j.contains("bandpass") && !j.at("bandpass").is_null()) {
        const auto& b = j.at("bandpass");
        detail::reject_unknown(b, {"d1", "d2"}, "bandpass");
        c.bandpass = BandPassParams{detail::get_as<double>(b, "d1", "bandpass"),
                                    detail::get_as<double>(b, "d2", "bandpass")};
    }
    if (j.contains("threshold")) c.threshold = detail::get_as<double>(j, "threshold", top);
    if (j.contains("morphology")) c.morphology = plan_from_json(j.at("morphology"));
    if (j.contains("speck_min_area")) c.speck_min_area = detail::get_as<int>(j, "speck_min_area", top);
    if (j.contains("spread_fraction")) c.spread_fraction = detail::get_as<double>(j, "spread_fraction", top);
    if (j.contains("frame_overrides")) c.frame_overrides = overrides_from_json(j.at("frame_overrides"));
    return c;
}

inline json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

/// Later files are merged over earlier ones (RFC 7386 merge patch), so an
/// exported overrides fragment can be layered on a base configuration.
inline PipelineConfig load_config(const std::vector<std::filesystem::path>& paths) {
    json merged = json::object();
    for (const auto& p : paths) merged.merge_patch(read_json_file(p));
    return config_from_json(merged);
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
    return load_config(std::vector<std::filesystem::path>{path});
}

}  // namespace dicseg
