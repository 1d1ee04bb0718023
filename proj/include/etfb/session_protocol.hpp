#pragma once

// Session protocol: one JSON object per line, UTF-8.
//
//   {"type":"snapshot","seq":12,"session":"s-0001", ...body fields...}
//
// Every message carries a sequence number (strictly increasing per sender)
// and the session id. The first message on a connection is a hello with
// protocol "1".

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include <nlohmann/json_fwd.hpp>

#include "etfb/calibration.hpp"
#include "etfb/contact.hpp"
#include "etfb/experiment.hpp"
#include "etfb/modulation.hpp"

namespace etfb::session {

inline constexpr const char* kProtocolVersion = "1";

enum class Mode { Synthetic, Operator };
const char* to_string(Mode mode);
Mode mode_from_string(const std::string& s);

struct Hello {
    std::string protocol = kProtocolVersion;
    std::string role;  ///< "operator" | "observer" from clients, "service" from the service
    std::optional<Mode> mode;  ///< set by the service
    friend bool operator==(const Hello&, const Hello&) = default;
};

struct Timers {
    double session = 0.0;           ///< s of simulated session time
    double trial = 0.0;             ///< s since trial start
    double window_elapsed = 0.0;    ///< s of contact window accumulated
    double window_remaining = 0.0;  ///< s
    friend bool operator==(const Timers&, const Timers&) = default;
};

struct Snapshot {
    FingertipState fingertip;
    double d = 0.0;
    double d_hat = 0.0;
    StimulusParams stimulus;  ///< what the device is emitting (inactive when stopped)
    std::optional<OutlineParams> outline;
    std::string session_phase;  ///< idle | calibration | trials | complete | aborted
    std::string trial_phase;    ///< TrialPhase name, empty outside trials
    bool paused = false;
    std::optional<Condition> condition;
    int part = 0;
    int block = 0;
    int repetition = 0;
    int attempt = 0;
    std::optional<int> calibration;  ///< calibration index while calibrating
    std::optional<int> probe_id;     ///< outstanding probe
    double working_intensity = 0.0;  ///< mA
    Timers timers;
    friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

struct CalibrationProbeMsg {
    int probe_id = 0;
    double intensity = 0.0;  ///< mA
    CalibrationPhase phase = CalibrationPhase::AscendDetect;
    int calibration = 0;
    friend bool operator==(const CalibrationProbeMsg&, const CalibrationProbeMsg&) = default;
};

struct CalibrationResponseMsg {
    int probe_id = 0;
    SubjectResponse response = SubjectResponse::NotFelt;
    friend bool operator==(const CalibrationResponseMsg&, const CalibrationResponseMsg&) = default;
};

struct FingerInput {
    Vec3 position;
    friend bool operator==(const FingerInput&, const FingerInput&) = default;
};

enum class ControlAction { Start, Pause, Resume, Abort };
const char* to_string(ControlAction action);

struct Control {
    ControlAction action = ControlAction::Start;
    friend bool operator==(const Control&, const Control&) = default;
};

enum class EventKind {
    Beep,
    TrialStart,
    TrialEnd,
    BlockStart,
    BlockEnd,
    CalibrationStart,
    CalibrationEnd,
    SessionComplete,
    SessionAborted,
    Fault,
};
const char* to_string(EventKind kind);

struct Event {
    EventKind kind = EventKind::Beep;
    std::string detail;  ///< e.g. "start"/"end" for beeps, label for calibrations
    int part = 0;
    int block = 0;
    std::optional<int> calibration;
    std::optional<CalibrationResult> result;
    std::optional<bool> valid;  ///< TrialEnd
    friend bool operator==(const Event&, const Event&) = default;
};

struct Ack {
    std::uint64_t ack_seq = 0;  ///< seq of the acknowledged message
    friend bool operator==(const Ack&, const Ack&) = default;
};

struct Error {
    std::string code;
    std::string message;
    std::optional<std::uint64_t> ref_seq;
    friend bool operator==(const Error&, const Error&) = default;
};

using Body = std::variant<Hello, Snapshot, CalibrationProbeMsg, CalibrationResponseMsg, FingerInput, Control, Event,
                          Ack, Error>;

struct SessionMessage {
    std::uint64_t seq = 0;
    std::string session_id;
    Body body;
    friend bool operator==(const SessionMessage&, const SessionMessage&) = default;
};

const char* type_name(const Body& body);

/// Decoding failure; code is a stable machine-readable token.
class MessageError : public std::runtime_error {
public:
    MessageError(std::string code, const std::string& what) : std::runtime_error(what), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

nlohmann::json to_json(const SessionMessage& msg);
/// Throws MessageError{"bad_message"} for schema violations.
SessionMessage message_from_json(const nlohmann::json& j);

/// Serialized message followed by '\n'.
std::string encode_line(const SessionMessage& msg);
/// Parses one line (trailing '\r' or '\n' ignored). Throws MessageError with
/// code "malformed" (not JSON) or "bad_message".
SessionMessage decode_line(std::string_view line);

}  // namespace etfb::session
