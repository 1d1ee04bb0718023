#pragma once

// Three-series method-of-limits intensity calibration:
//   1. ascend from a low intensity until the stimulus is felt (detection),
//   2. keep ascending until it causes discomfort,
//   3. descend from the third quartile of [detection, discomfort] until it
//      is no longer felt.
// The working intensity interpolates between detection and discomfort.

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "etfb/modulation.hpp"

namespace etfb {

enum class CalibrationPhase { AscendDetect, AscendDiscomfort, Descend, Done };
enum class SubjectResponse { NotFelt, Felt, Discomfort };

const char* to_string(CalibrationPhase phase);
const char* to_string(SubjectResponse response);
SubjectResponse subject_response_from_string(const std::string& s);
CalibrationPhase calibration_phase_from_string(const std::string& s);

struct CalibrationConfig {
    double step = 0.1;       ///< mA
    double start_low = 0.1;  ///< mA
    double lambda = 0.5;     ///< working point between detection (0) and discomfort (1)
    double probe_frequency = 200.0;    ///< Hz
    double probe_pulse_width = 500.0;  ///< µs
    double max_intensity = 9.0;        ///< mA, hardware ceiling
    double probe_on_time = 1.0;   ///< s
    double probe_off_time = 0.5;  ///< s

    void validate() const;
};

CalibrationConfig calibration_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CalibrationConfig& cfg);

struct CalibrationResult {
    double detection_threshold = 0.0;   ///< mA
    double discomfort_threshold = 0.0;  ///< mA
    double working_intensity = 0.0;     ///< mA
    friend bool operator==(const CalibrationResult&, const CalibrationResult&) = default;
};

struct CalibrationProbe {
    int id = 0;
    CalibrationPhase phase = CalibrationPhase::AscendDetect;
    StimulusParams params;
};

struct ProbeRecord {
    int probe_id = 0;
    CalibrationPhase phase = CalibrationPhase::AscendDetect;
    double intensity = 0.0;
    SubjectResponse response = SubjectResponse::NotFelt;
    double t = 0.0;  ///< s since calibration start
};

struct CalibrationSession {
    CalibrationPhase phase = CalibrationPhase::AscendDetect;
    int grid_index = 0;  ///< current intensity = start_low + grid_index * step
    std::optional<double> detect_up;
    std::optional<double> discomfort;
    std::optional<double> detect_down;
    std::optional<double> descend_start;
    std::optional<CalibrationResult> result;
    bool anomalous = false;
    int probes_issued = 0;
    std::optional<int> outstanding_probe;  ///< id awaiting a response
    std::vector<ProbeRecord> transcript;
};

class CalibrationError : public std::runtime_error {
public:
    enum class Kind { SafetyLimit, Invalid, Protocol };
    CalibrationError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/// Single-consumer state machine; responses must answer the outstanding probe.
class Calibrator {
public:
    explicit Calibrator(CalibrationConfig cfg = {});

    /// Probe for the current intensity, or nullopt once Done. Re-issues the
    /// outstanding probe if it has not been answered yet.
    std::optional<CalibrationProbe> next_probe();

    /// Throws CalibrationError{Protocol} for a wrong probe id or when Done,
    /// {SafetyLimit} when an ascent would pass max_intensity.
    void record_response(int probe_id, SubjectResponse response);

    /// Requires phase Done. Throws CalibrationError{Invalid} when detection >= discomfort.
    CalibrationResult finalize() const;

    double current_intensity() const;
    const CalibrationSession& session() const { return session_; }
    const CalibrationConfig& config() const { return cfg_; }
    bool done() const { return session_.phase == CalibrationPhase::Done; }

private:
    double grid_value(int index) const;
    int snap_down(double intensity) const;
    void step_up();
    void enter_descend();

    CalibrationConfig cfg_;
    CalibrationSession session_;
};

/// Interpolated working point; throws CalibrationError{Invalid} unless detection < discomfort.
CalibrationResult make_result(double detect_up, double discomfort, double detect_down, double lambda);

/// One JSON object per probe: phase, intensity_ma, response, t_s, probe_id.
void write_transcript_jsonl(std::ostream& out, const std::vector<ProbeRecord>& transcript);

}  // namespace etfb
