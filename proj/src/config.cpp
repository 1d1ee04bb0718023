#include "etfb/config.hpp"

#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "etfb/errors.hpp"

namespace etfb {
namespace {

// A sub-document is either inline or a string path resolved against base_dir.
nlohmann::json resolve(const nlohmann::json& j, const char* key, const std::filesystem::path& base_dir) {
    if (!j.contains(key)) return nlohmann::json::object();
    const auto& v = j.at(key);
    if (v.is_string()) {
        std::filesystem::path p = v.get<std::string>();
        if (p.is_relative()) p = base_dir / p;
        return read_json_file(p);
    }
    if (!v.is_object()) throw ConfigError(fmt::format("config: '{}' must be an object or a file path", key));
    return v;
}

}  // namespace

nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

SessionConfig session_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    SessionConfig cfg;
    try {
        const int version = j.value("version", kConfigVersion);
        if (version != kConfigVersion) throw ConfigError(fmt::format("config: unsupported version {}", version));
        cfg.seed = j.value("seed", cfg.seed);
        cfg.participants = j.value("participants", cfg.participants);
        cfg.first_participant = j.value("first_participant", cfg.first_participant);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (cfg.participants < 1) throw ConfigError("config: participants must be >= 1");
    if (cfg.first_participant < 0) throw ConfigError("config: first_participant must be >= 0");

    if (j.contains("scene")) cfg.scene = scene_spec_from_json(resolve(j, "scene", base_dir));
    cfg.subject = subject_params_from_json(resolve(j, "subject", base_dir));
    cfg.modulation = modulation_config_from_json(resolve(j, "modulation", base_dir));
    cfg.calibration = calibration_config_from_json(resolve(j, "calibration", base_dir));
    cfg.harness = harness_config_from_json(resolve(j, "harness", base_dir));
    return cfg;
}

SessionConfig load_session_config(const std::filesystem::path& path) {
    return session_config_from_json(read_json_file(path), path.parent_path());
}

nlohmann::json to_json(const SessionConfig& cfg) {
    return {{"version", kConfigVersion},
            {"seed", cfg.seed},
            {"participants", cfg.participants},
            {"first_participant", cfg.first_participant},
            {"scene", to_json(cfg.scene)},
            {"subject", to_json(cfg.subject)},
            {"modulation", to_json(cfg.modulation)},
            {"calibration", to_json(cfg.calibration)},
            {"harness", to_json(cfg.harness)}};
}

}  // namespace etfb
