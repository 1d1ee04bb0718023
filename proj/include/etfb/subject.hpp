#pragma once

// Synthetic participant: a qualitative stand-in that answers calibration
// probes and controls fingertip depth. It reproduces effect directions
// (feedback reduces depth, thresholds rise with exposure), not human effect sizes.

#include <cstdint>
#include <filesystem>
#include <random>

#include <nlohmann/json_fwd.hpp>

#include "etfb/calibration.hpp"
#include "etfb/modulation.hpp"

namespace etfb {

struct SubjectParams {
    double detect_threshold = 1.15;     ///< mA
    double discomfort_threshold = 2.95;  ///< mA
    double habituation_gain = 3.0;   ///< per exposure-hour
    double response_noise_sd = 0.0;  ///< mA
    double motor_tremor_sd = 0.002;  ///< m
    double depth_control_gain = 0.6;  ///< in [0,1]
    std::uint64_t rng_seed = 1;

    void validate() const;
};

SubjectParams subject_params_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SubjectParams& p);
SubjectParams load_subject(const std::filesystem::path& path);

class SubjectModel {
public:
    explicit SubjectModel(SubjectParams params);

    SubjectResponse respond(const StimulusParams& probe);

    /// Scale both thresholds by (1 + gain * hours), clamped to the device range.
    void habituate(double exposure_hours);

    /// Target fingertip depth (m) for the next tick; never negative.
    double steer(double feedback_strength, double nominal_depth);

    const SubjectParams& params() const { return params_; }
    double detect_threshold() const { return params_.detect_threshold; }
    double discomfort_threshold() const { return params_.discomfort_threshold; }

private:
    double gaussian(double sd);

    SubjectParams params_;
    std::mt19937_64 rng_;
};

}  // namespace etfb
