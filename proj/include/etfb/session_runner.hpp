#pragma once

// Offline protocol runner: calibration, part 1, recalibration, part 2,
// final calibration, with the synthetic subject in the loop.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "etfb/calibration.hpp"
#include "etfb/config.hpp"
#include "etfb/device.hpp"
#include "etfb/trial.hpp"

namespace etfb {

struct CalibrationRecord {
    int index = 0;  ///< 0..2
    std::string label;
    CalibrationSession session;
    std::optional<CalibrationResult> result;
    std::string status = "ok";  ///< ok | aborted | invalid
    std::string error;
    /// Subject thresholds at the time of calibration (synthetic ground truth).
    double true_detect = 0.0;
    double true_discomfort = 0.0;
};

using Responder = std::function<SubjectResponse(const CalibrationProbe&)>;

/// Runs the full method-of-limits procedure, driving each probe through the
/// device (SetStimulus, Start, on-time, Stop, off-time). Calibration errors
/// are captured in the record's status instead of thrown.
CalibrationRecord run_calibration(const CalibrationConfig& cfg, const Responder& respond, DeviceSimulator* device);

struct SessionDataset {
    int participant_id = 0;
    std::uint64_t seed = 0;
    SessionPlan plan;
    std::vector<TrialRecord> trials;
    std::vector<CalibrationRecord> calibrations;
    std::string status = "complete";  ///< complete | aborted
    std::string error;
    double stimulation_exposure = 0.0;  ///< s
};

/// Subject parameters for one participant: the configured subject with an rng
/// seed derived from (session seed, participant id).
SubjectParams participant_subject(const SessionConfig& cfg, int participant_id);

SessionDataset run_session(int participant_id, const SessionConfig& cfg);
SessionDataset run_session(int participant_id, SubjectModel& subject, const SessionConfig& cfg);

/// One dataset per participant id in [first, first + participants).
std::vector<SessionDataset> run_study(const SessionConfig& cfg);

}  // namespace etfb
