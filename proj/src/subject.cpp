#include "etfb/subject.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "etfb/errors.hpp"
#include "etfb/stimulator.hpp"

namespace etfb {
namespace {

// Minimum gap kept between the two thresholds when clamping (one calibration step).
constexpr double kThresholdGap = 0.1;

}  // namespace

void SubjectParams::validate() const {
    using namespace device_limits;
    if (!(detect_threshold >= kIntensityMin && detect_threshold < discomfort_threshold &&
          discomfort_threshold <= kIntensityMax))
        throw ConfigError("subject: thresholds must satisfy 0.1 <= detect < discomfort <= 9 mA");
    if (!(response_noise_sd >= 0.0) || !(motor_tremor_sd >= 0.0)) throw ConfigError("subject: noise sd must be >= 0");
    if (!(habituation_gain >= 0.0)) throw ConfigError("subject: habituation_gain must be >= 0");
    if (!(depth_control_gain >= 0.0 && depth_control_gain <= 1.0))
        throw ConfigError("subject: depth_control_gain must lie in [0,1]");
}

SubjectParams subject_params_from_json(const nlohmann::json& j) {
    SubjectParams p;
    try {
        p.detect_threshold = j.value("detect_threshold", p.detect_threshold);
        p.discomfort_threshold = j.value("discomfort_threshold", p.discomfort_threshold);
        p.habituation_gain = j.value("habituation_gain", p.habituation_gain);
        p.response_noise_sd = j.value("response_noise_sd", p.response_noise_sd);
        p.motor_tremor_sd = j.value("motor_tremor_sd", p.motor_tremor_sd);
        p.depth_control_gain = j.value("depth_control_gain", p.depth_control_gain);
        p.rng_seed = j.value("rng_seed", p.rng_seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("subject: ") + e.what());
    }
    p.validate();
    return p;
}

nlohmann::json to_json(const SubjectParams& p) {
    return {{"detect_threshold", p.detect_threshold},     {"discomfort_threshold", p.discomfort_threshold},
            {"habituation_gain", p.habituation_gain},     {"response_noise_sd", p.response_noise_sd},
            {"motor_tremor_sd", p.motor_tremor_sd},       {"depth_control_gain", p.depth_control_gain},
            {"rng_seed", p.rng_seed}};
}

SubjectParams load_subject(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open subject file " + path.string());
    try {
        return subject_params_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("subject file " + path.string() + ": " + e.what());
    }
}

SubjectModel::SubjectModel(SubjectParams params) : params_(params), rng_(params.rng_seed) { params_.validate(); }

double SubjectModel::gaussian(double sd) {
    // normal_distribution requires sd > 0; zero noise must not consume draws.
    if (sd == 0.0) return 0.0;
    return std::normal_distribution<double>(0.0, sd)(rng_);
}

SubjectResponse SubjectModel::respond(const StimulusParams& probe) {
    const double detect = params_.detect_threshold + gaussian(params_.response_noise_sd);
    const double discomfort = params_.discomfort_threshold + gaussian(params_.response_noise_sd);
    if (probe.intensity >= discomfort) return SubjectResponse::Discomfort;
    if (probe.intensity >= detect) return SubjectResponse::Felt;
    return SubjectResponse::NotFelt;
}

void SubjectModel::habituate(double exposure_hours) {
    if (!(exposure_hours >= 0.0)) throw ContractViolation("habituate: exposure must be >= 0");
    const double scale = 1.0 + params_.habituation_gain * exposure_hours;
    using namespace device_limits;
    params_.discomfort_threshold =
        std::clamp(params_.discomfort_threshold * scale, kIntensityMin + kThresholdGap, kIntensityMax);
    params_.detect_threshold =
        std::clamp(params_.detect_threshold * scale, kIntensityMin, params_.discomfort_threshold - kThresholdGap);
}

double SubjectModel::steer(double feedback_strength, double nominal_depth) {
    if (!std::isfinite(feedback_strength) || !std::isfinite(nominal_depth) || nominal_depth < 0.0)
        throw ContractViolation("steer: non-finite input or negative nominal depth");
    const double target = nominal_depth * (1.0 - params_.depth_control_gain * feedback_strength);
    return std::max(0.0, target + gaussian(params_.motor_tremor_sd));
}

}  // namespace etfb
