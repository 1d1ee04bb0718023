#pragma once

// Study design: conditions, latin-square session plans, scene layout and
// harness timing parameters.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "etfb/contact.hpp"

namespace etfb {

enum class FeedbackMode { None = 0, Visual = 1, Electrotactile = 2, VisuoElectrotactile = 3 };
enum class Shading { Opaque = 0, Wireframe = 1 };

inline constexpr std::array<FeedbackMode, 4> kFeedbackModes{FeedbackMode::None, FeedbackMode::Visual,
                                                            FeedbackMode::Electrotactile,
                                                            FeedbackMode::VisuoElectrotactile};

const char* to_string(FeedbackMode mode);
const char* to_string(Shading shading);
FeedbackMode feedback_mode_from_string(const std::string& s);
Shading shading_from_string(const std::string& s);

struct Condition {
    FeedbackMode feedback = FeedbackMode::None;
    Shading shading = Shading::Opaque;

    bool visual() const { return feedback == FeedbackMode::Visual || feedback == FeedbackMode::VisuoElectrotactile; }
    bool electrotactile() const {
        return feedback == FeedbackMode::Electrotactile || feedback == FeedbackMode::VisuoElectrotactile;
    }
    friend bool operator==(const Condition&, const Condition&) = default;
};

struct PlanEntry {
    int part = 1;        ///< 1..2
    int block = 1;       ///< 1..4 within the part
    int repetition = 1;  ///< 1..12 within the block
    Condition condition;
};

inline constexpr int kParts = 2;
inline constexpr int kBlocksPerPart = 4;
inline constexpr int kRepetitionsPerBlock = 12;
inline constexpr int kTrialsPerPart = kBlocksPerPart * kRepetitionsPerBlock;
inline constexpr int kTrialsPerSession = kParts * kTrialsPerPart;

/// Calibrations run before part 1, after part 1 and after part 2.
inline constexpr std::array<const char*, 3> kCalibrationLabels{"before_part1", "after_part1", "after_part2"};

struct SessionPlan {
    int participant_id = 0;
    std::uint64_t seed = 0;
    std::array<std::array<Condition, kBlocksPerPart>, kParts> blocks{};
    std::vector<PlanEntry> entries;  ///< part-major, block-major, repetition order
};

/// Row r of the 4x4 balanced (Williams) latin square over feedback levels.
std::array<FeedbackMode, 4> latin_square_row(int row);

/// Feedback order from row (participant_id mod 4) in both parts; the seed
/// picks which two levels are opaque in part 1, part 2 swaps shading.
SessionPlan build_plan(int participant_id, std::uint64_t seed);

/// Scene plus the task layout around it.
struct SceneSpec {
    Scene objects;
    std::string target_id = "cube";
    Vec3 rest_center{0.25, 0.85, -0.35};
    Vec3 rest_half_extents{0.075, 0.05, 0.075};

    const SceneObject& target() const;
    const AxisAlignedBox& target_box() const;
    /// Centre of the target's top face.
    Vec3 contact_point() const;
};

/// 15 cm cube on the left of a 0.75 m table, resting area on the right.
SceneSpec default_scene_spec();
SceneSpec scene_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SceneSpec& spec);

struct HarnessConfig {
    double tick_rate = 90.0;        ///< Hz
    double window_duration = 3.0;   ///< s of steady contact
    double contact_grace = 0.1;     ///< s of tolerated contact loss
    double nominal_depth = 0.02;    ///< m, subject's uncorrected press depth
    double transport_time = 1.0;    ///< s, rest -> hover
    double descent_time = 0.4;      ///< s, hover -> surface
    double return_time = 1.0;       ///< s, surface -> rest
    double hover_height = 0.05;     ///< m above the contact point
    double contact_timeout = 5.0;   ///< s after trial start
    int max_retries = 3;            ///< re-runs of an invalid plan entry
    bool record_samples = true;

    double dt() const { return 1.0 / tick_rate; }
    int window_ticks() const;
    void validate() const;
};

HarnessConfig harness_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const HarnessConfig& cfg);

/// Minimum-jerk blend s(tau) = 10 tau^3 - 15 tau^4 + 6 tau^5, tau clamped to [0,1].
double minimum_jerk(double tau);

}  // namespace etfb
