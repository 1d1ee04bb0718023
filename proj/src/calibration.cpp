#include "etfb/calibration.hpp"

#include <cmath>
#include <ostream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "etfb/errors.hpp"
#include "etfb/stimulator.hpp"

namespace etfb {

const char* to_string(CalibrationPhase phase) {
    switch (phase) {
        case CalibrationPhase::AscendDetect: return "ascend_detect";
        case CalibrationPhase::AscendDiscomfort: return "ascend_discomfort";
        case CalibrationPhase::Descend: return "descend";
        case CalibrationPhase::Done: return "done";
    }
    return "?";
}

const char* to_string(SubjectResponse response) {
    switch (response) {
        case SubjectResponse::NotFelt: return "not_felt";
        case SubjectResponse::Felt: return "felt";
        case SubjectResponse::Discomfort: return "discomfort";
    }
    return "?";
}

SubjectResponse subject_response_from_string(const std::string& s) {
    if (s == "not_felt") return SubjectResponse::NotFelt;
    if (s == "felt") return SubjectResponse::Felt;
    if (s == "discomfort") return SubjectResponse::Discomfort;
    throw ConfigError("unknown subject response '" + s + "'");
}

CalibrationPhase calibration_phase_from_string(const std::string& s) {
    for (auto p : {CalibrationPhase::AscendDetect, CalibrationPhase::AscendDiscomfort, CalibrationPhase::Descend,
                   CalibrationPhase::Done})
        if (s == to_string(p)) return p;
    throw ConfigError("unknown calibration phase '" + s + "'");
}

void CalibrationConfig::validate() const {
    if (!(step > 0.0)) throw ConfigError("calibration: step must be positive");
    if (!(start_low >= device_limits::kIntensityMin)) throw ConfigError("calibration: start_low below device minimum");
    if (!(max_intensity <= device_limits::kIntensityMax && max_intensity > start_low))
        throw ConfigError("calibration: max_intensity must lie in (start_low, 9] mA");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("calibration: lambda must lie in [0,1]");
    if (!validate_params({start_low, probe_pulse_width, probe_frequency, true}).empty())
        throw ConfigError("calibration: probe pulse width/frequency outside device range");
    if (!(probe_on_time > 0.0) || !(probe_off_time >= 0.0)) throw ConfigError("calibration: invalid probe pacing");
}

CalibrationConfig calibration_config_from_json(const nlohmann::json& j) {
    CalibrationConfig cfg;
    try {
        cfg.step = j.value("step", cfg.step);
        cfg.start_low = j.value("start_low", cfg.start_low);
        cfg.lambda = j.value("lambda", cfg.lambda);
        cfg.probe_frequency = j.value("probe_frequency", cfg.probe_frequency);
        cfg.probe_pulse_width = j.value("probe_pulse_width", cfg.probe_pulse_width);
        cfg.max_intensity = j.value("max_intensity", cfg.max_intensity);
        cfg.probe_on_time = j.value("probe_on_time", cfg.probe_on_time);
        cfg.probe_off_time = j.value("probe_off_time", cfg.probe_off_time);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("calibration: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

nlohmann::json to_json(const CalibrationConfig& cfg) {
    return {{"step", cfg.step},
            {"start_low", cfg.start_low},
            {"lambda", cfg.lambda},
            {"probe_frequency", cfg.probe_frequency},
            {"probe_pulse_width", cfg.probe_pulse_width},
            {"max_intensity", cfg.max_intensity},
            {"probe_on_time", cfg.probe_on_time},
            {"probe_off_time", cfg.probe_off_time}};
}

CalibrationResult make_result(double detect_up, double discomfort, double detect_down, double lambda) {
    const double detection = 0.5 * (detect_up + detect_down);
    if (!(detection < discomfort))
        throw CalibrationError(CalibrationError::Kind::Invalid,
                               fmt::format("detection threshold {:.2f} mA not below discomfort threshold {:.2f} mA",
                                           detection, discomfort));
    return {detection, discomfort, detection + lambda * (discomfort - detection)};
}

Calibrator::Calibrator(CalibrationConfig cfg) : cfg_(cfg) { cfg_.validate(); }

double Calibrator::grid_value(int index) const {
    // Round away accumulated binary error so grid points compare as decimals.
    return std::round((cfg_.start_low + index * cfg_.step) * 1e9) / 1e9;
}

int Calibrator::snap_down(double intensity) const {
    return static_cast<int>(std::floor((intensity - cfg_.start_low) / cfg_.step + 1e-9));
}

double Calibrator::current_intensity() const { return grid_value(session_.grid_index); }

std::optional<CalibrationProbe> Calibrator::next_probe() {
    if (done()) return std::nullopt;
    if (!session_.outstanding_probe) session_.outstanding_probe = ++session_.probes_issued;
    return CalibrationProbe{*session_.outstanding_probe, session_.phase,
                            StimulusParams{current_intensity(), cfg_.probe_pulse_width, cfg_.probe_frequency, true}};
}

void Calibrator::step_up() {
    if (grid_value(session_.grid_index + 1) > cfg_.max_intensity + 1e-9)
        throw CalibrationError(CalibrationError::Kind::SafetyLimit,
                               fmt::format("calibration aborted: next probe would exceed {:.1f} mA", cfg_.max_intensity));
    ++session_.grid_index;
}

void Calibrator::enter_descend() {
    const double up = *session_.detect_up;
    const double q3 = up + 0.75 * (*session_.discomfort - up);
    session_.grid_index = std::max(0, snap_down(q3));
    session_.descend_start = current_intensity();
    session_.phase = CalibrationPhase::Descend;
}

void Calibrator::record_response(int probe_id, SubjectResponse response) {
    if (done()) throw CalibrationError(CalibrationError::Kind::Protocol, "calibration already finished");
    if (!session_.outstanding_probe || *session_.outstanding_probe != probe_id)
        throw CalibrationError(CalibrationError::Kind::Protocol,
                               fmt::format("response to probe {} does not match the outstanding probe", probe_id));

    const double intensity = current_intensity();
    session_.transcript.push_back(
        {probe_id, session_.phase, intensity, response, (probe_id - 1) * (cfg_.probe_on_time + cfg_.probe_off_time)});
    session_.outstanding_probe.reset();

    switch (session_.phase) {
        case CalibrationPhase::AscendDetect:
            if (response == SubjectResponse::Felt) {
                session_.detect_up = intensity;
                session_.phase = CalibrationPhase::AscendDiscomfort;
                step_up();
            } else if (response == SubjectResponse::Discomfort) {
                session_.anomalous = true;
                session_.detect_up = intensity;
                session_.discomfort = intensity;
                enter_descend();
            } else {
                step_up();
            }
            break;
        case CalibrationPhase::AscendDiscomfort:
            if (response == SubjectResponse::Discomfort) {
                session_.discomfort = intensity;
                enter_descend();
            } else {
                step_up();
            }
            break;
        case CalibrationPhase::Descend:
            if (response == SubjectResponse::NotFelt) {
                session_.detect_down = grid_value(session_.grid_index + 1);
            } else if (session_.grid_index == 0) {
                session_.detect_down = intensity;
            } else {
                --session_.grid_index;
                break;
            }
            session_.phase = CalibrationPhase::Done;
            try {
                session_.result =
                    make_result(*session_.detect_up, *session_.discomfort, *session_.detect_down, cfg_.lambda);
            } catch (const CalibrationError&) {
                session_.result.reset();
            }
            break;
        case CalibrationPhase::Done: break;
    }
}

CalibrationResult Calibrator::finalize() const {
    if (!done()) throw CalibrationError(CalibrationError::Kind::Protocol, "calibration not finished");
    return make_result(*session_.detect_up, *session_.discomfort, *session_.detect_down, cfg_.lambda);
}

void write_transcript_jsonl(std::ostream& out, const std::vector<ProbeRecord>& transcript) {
    for (const auto& r : transcript) {
        out << fmt::format(R"({{"probe_id":{},"phase":"{}","intensity_ma":{:.2f},"response":"{}","t_s":{:.3f}}})",
                           r.probe_id, to_string(r.phase), r.intensity, to_string(r.response), r.t)
            << '\n';
    }
}

}  // namespace etfb
