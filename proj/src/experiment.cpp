#include "etfb/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "etfb/errors.hpp"

namespace etfb {

const char* to_string(FeedbackMode mode) {
    switch (mode) {
        case FeedbackMode::None: return "none";
        case FeedbackMode::Visual: return "visual";
        case FeedbackMode::Electrotactile: return "electrotactile";
        case FeedbackMode::VisuoElectrotactile: return "visuo_electrotactile";
    }
    return "?";
}

const char* to_string(Shading shading) { return shading == Shading::Opaque ? "opaque" : "wireframe"; }

FeedbackMode feedback_mode_from_string(const std::string& s) {
    for (auto m : kFeedbackModes)
        if (s == to_string(m)) return m;
    throw ConfigError("unknown feedback condition '" + s + "'");
}

Shading shading_from_string(const std::string& s) {
    if (s == "opaque") return Shading::Opaque;
    if (s == "wireframe") return Shading::Wireframe;
    throw ConfigError("unknown shading '" + s + "'");
}

std::array<FeedbackMode, 4> latin_square_row(int row) {
    // Williams design for n = 4: each level once per position, and each
    // ordered pair of neighbours exactly once across the four rows.
    static constexpr std::array<int, 4> kFirstRow{0, 1, 3, 2};
    const int r = ((row % 4) + 4) % 4;
    std::array<FeedbackMode, 4> out{};
    for (int i = 0; i < 4; ++i) out[i] = kFeedbackModes[(kFirstRow[i] + r) % 4];
    return out;
}

SessionPlan build_plan(int participant_id, std::uint64_t seed) {
    if (participant_id < 0) throw ContractViolation("build_plan: participant_id must be >= 0");
    SessionPlan plan;
    plan.participant_id = participant_id;
    plan.seed = seed;

    // Two of the four feedback levels are opaque in part 1 (one of C(4,2) = 6 choices).
    static constexpr std::array<std::array<bool, 4>, 6> kOpaqueChoices{{{true, true, false, false},
                                                                         {true, false, true, false},
                                                                         {true, false, false, true},
                                                                         {false, true, true, false},
                                                                         {false, true, false, true},
                                                                         {false, false, true, true}}};
    std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(participant_id + 1)));
    const auto& opaque_in_part1 = kOpaqueChoices[rng() % kOpaqueChoices.size()];

    const auto order = latin_square_row(participant_id % 4);
    for (int part = 0; part < kParts; ++part) {
        for (int block = 0; block < kBlocksPerPart; ++block) {
            const FeedbackMode fb = order[block];
            const bool opaque = opaque_in_part1[static_cast<int>(fb)] == (part == 0);
            plan.blocks[part][block] = {fb, opaque ? Shading::Opaque : Shading::Wireframe};
            for (int rep = 0; rep < kRepetitionsPerBlock; ++rep)
                plan.entries.push_back({part + 1, block + 1, rep + 1, plan.blocks[part][block]});
        }
    }
    return plan;
}

const SceneObject& SceneSpec::target() const {
    for (const auto& o : objects)
        if (o.id() == target_id) return o;
    throw ConfigError("scene: target object '" + target_id + "' not found");
}

const AxisAlignedBox& SceneSpec::target_box() const {
    const auto* box = std::get_if<AxisAlignedBox>(&target().shape());
    if (!box) throw ConfigError("scene: target object '" + target_id + "' must be a box");
    return *box;
}

Vec3 SceneSpec::contact_point() const {
    const auto& b = target_box();
    return {b.center.x, b.center.y + b.half_extents.y, b.center.z};
}

SceneSpec default_scene_spec() {
    SceneSpec spec;
    constexpr double kTableTop = 0.75;
    constexpr double kHalfEdge = 0.075;
    spec.objects.push_back(
        SceneObject::box("cube", {-0.15, kTableTop + kHalfEdge, -0.40}, {kHalfEdge, kHalfEdge, kHalfEdge}));
    spec.objects.push_back(SceneObject::box("table", {0.0, kTableTop - 0.025, -0.40}, {0.60, 0.025, 0.30}));
    return spec;
}

SceneSpec scene_spec_from_json(const nlohmann::json& j) {
    SceneSpec spec;
    spec.objects = scene_from_json(j);
    try {
        spec.target_id = j.value("target", spec.target_id);
        if (j.contains("rest_area")) {
            const auto& r = j.at("rest_area");
            const auto c = r.at("center").get<std::vector<double>>();
            const auto h = r.at("half_extents").get<std::vector<double>>();
            if (c.size() != 3 || h.size() != 3) throw ConfigError("rest_area: center/half_extents need 3 numbers");
            spec.rest_center = {c[0], c[1], c[2]};
            spec.rest_half_extents = {h[0], h[1], h[2]};
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scene: ") + e.what());
    }
    spec.target_box();
    for (const auto& o : spec.objects)
        if (o.strictly_contains(spec.rest_center))
            throw ConfigError("scene: resting area centre lies inside '" + o.id() + "'");
    return spec;
}

nlohmann::json to_json(const SceneSpec& spec) {
    auto j = scene_to_json(spec.objects);
    j["target"] = spec.target_id;
    j["rest_area"] = {{"center", {spec.rest_center.x, spec.rest_center.y, spec.rest_center.z}},
                      {"half_extents", {spec.rest_half_extents.x, spec.rest_half_extents.y, spec.rest_half_extents.z}}};
    return j;
}

int HarnessConfig::window_ticks() const { return static_cast<int>(std::lround(window_duration * tick_rate)); }

void HarnessConfig::validate() const {
    if (!(tick_rate > 0.0)) throw ConfigError("harness: tick_rate must be positive");
    if (!(window_duration > 0.0)) throw ConfigError("harness: window_duration must be positive");
    if (!(contact_grace >= 0.0)) throw ConfigError("harness: contact_grace must be >= 0");
    if (!(nominal_depth >= 0.0)) throw ConfigError("harness: nominal_depth must be >= 0");
    if (!(transport_time > 0.0 && descent_time > 0.0 && return_time > 0.0))
        throw ConfigError("harness: trajectory durations must be positive");
    if (!(hover_height > 0.0)) throw ConfigError("harness: hover_height must be positive");
    if (!(contact_timeout > transport_time + descent_time))
        throw ConfigError("harness: contact_timeout must exceed the approach duration");
    if (max_retries < 0) throw ConfigError("harness: max_retries must be >= 0");
}

HarnessConfig harness_config_from_json(const nlohmann::json& j) {
    HarnessConfig cfg;
    try {
        cfg.tick_rate = j.value("tick_rate", cfg.tick_rate);
        cfg.window_duration = j.value("window_duration", cfg.window_duration);
        cfg.contact_grace = j.value("contact_grace", cfg.contact_grace);
        cfg.nominal_depth = j.value("nominal_depth", cfg.nominal_depth);
        cfg.transport_time = j.value("transport_time", cfg.transport_time);
        cfg.descent_time = j.value("descent_time", cfg.descent_time);
        cfg.return_time = j.value("return_time", cfg.return_time);
        cfg.hover_height = j.value("hover_height", cfg.hover_height);
        cfg.contact_timeout = j.value("contact_timeout", cfg.contact_timeout);
        cfg.max_retries = j.value("max_retries", cfg.max_retries);
        cfg.record_samples = j.value("record_samples", cfg.record_samples);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("harness: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

nlohmann::json to_json(const HarnessConfig& cfg) {
    return {{"tick_rate", cfg.tick_rate},
            {"window_duration", cfg.window_duration},
            {"contact_grace", cfg.contact_grace},
            {"nominal_depth", cfg.nominal_depth},
            {"transport_time", cfg.transport_time},
            {"descent_time", cfg.descent_time},
            {"return_time", cfg.return_time},
            {"hover_height", cfg.hover_height},
            {"contact_timeout", cfg.contact_timeout},
            {"max_retries", cfg.max_retries},
            {"record_samples", cfg.record_samples}};
}

double minimum_jerk(double tau) {
    const double s = std::clamp(tau, 0.0, 1.0);
    return s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
}

}  // namespace etfb
