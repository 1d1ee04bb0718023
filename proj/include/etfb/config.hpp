#pragma once

// Session configuration file (UTF-8 JSON). Sub-documents may be given inline
// or as a path relative to the configuration file:
//
//   {
//     "version": 1,
//     "seed": 7,
//     "participants": 1,
//     "scene": "scene.json",
//     "subject": {"detect_threshold": 1.15, ...},
//     "modulation": {...}, "calibration": {...}, "harness": {...}
//   }

#include <cstdint>
#include <filesystem>

#include <nlohmann/json_fwd.hpp>

#include "etfb/calibration.hpp"
#include "etfb/experiment.hpp"
#include "etfb/modulation.hpp"
#include "etfb/stimulator.hpp"
#include "etfb/subject.hpp"

namespace etfb {

inline constexpr int kConfigVersion = 1;

struct SessionConfig {
    SceneSpec scene = default_scene_spec();
    SubjectParams subject;
    ModulationConfig modulation;
    CalibrationConfig calibration;
    HarnessConfig harness;
    ElectrodeLayout layout;
    std::uint64_t seed = 1;
    int participants = 1;
    int first_participant = 0;
};

SessionConfig session_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
SessionConfig load_session_config(const std::filesystem::path& path);
nlohmann::json to_json(const SessionConfig& cfg);

/// Parse a JSON file, mapping parse failures to ConfigError and open failures to IoError.
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace etfb
