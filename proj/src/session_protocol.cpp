#include "etfb/session_protocol.hpp"

#include <array>

#include <nlohmann/json.hpp>

#include "etfb/detail/overloaded.hpp"
#include "etfb/errors.hpp"

namespace etfb::session {
namespace {

using nlohmann::json;

constexpr std::array<const char*, 6> kFaceNames{"-x", "+x", "-y", "+y", "-z", "+z"};

[[noreturn]] void bad(const std::string& what) { throw MessageError("bad_message", what); }

json vec(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec_from(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 3) bad(std::string(what) + " must be a 3-element array");
    Vec3 v;
    for (int i = 0; i < 3; ++i) {
        if (!j[i].is_number()) bad(std::string(what) + " must contain numbers");
        v[i] = j[i].get<double>();
    }
    if (!is_finite(v)) bad(std::string(what) + " must be finite");
    return v;
}

template <class T>
json opt(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> opt_from(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

json result_json(const CalibrationResult& r) {
    return {{"detection_threshold_ma", r.detection_threshold},
            {"discomfort_threshold_ma", r.discomfort_threshold},
            {"working_intensity_ma", r.working_intensity}};
}

json body_json(const Hello& m) {
    json j{{"protocol", m.protocol}, {"role", m.role}};
    if (m.mode) j["mode"] = to_string(*m.mode);
    return j;
}

json body_json(const Snapshot& m) {
    const auto& f = m.fingertip;
    json fingertip{{"real", vec(f.real_pos)},
                   {"avatar", vec(f.avatar_pos)},
                   {"in_contact", f.in_contact},
                   {"object", opt(f.contact_object)},
                   {"face", f.contact_face ? json(kFaceNames[static_cast<int>(*f.contact_face)]) : json(nullptr)}};
    json j{{"fingertip", fingertip},
           {"d", m.d},
           {"d_hat", m.d_hat},
           {"stimulus",
            {{"active", m.stimulus.active},
             {"intensity_ma", m.stimulus.intensity},
             {"pulse_width_us", m.stimulus.pulse_width},
             {"frequency_hz", m.stimulus.frequency}}},
           {"outline", m.outline ? json{{"scale", m.outline->scale}, {"border_px", m.outline->border}} : json(nullptr)},
           {"session_phase", m.session_phase},
           {"trial_phase", m.trial_phase},
           {"paused", m.paused},
           {"condition", m.condition ? json{{"feedback", to_string(m.condition->feedback)},
                                            {"shading", to_string(m.condition->shading)}}
                                     : json(nullptr)},
           {"part", m.part},
           {"block", m.block},
           {"repetition", m.repetition},
           {"attempt", m.attempt},
           {"calibration", opt(m.calibration)},
           {"probe_id", opt(m.probe_id)},
           {"working_intensity_ma", m.working_intensity},
           {"timers",
            {{"session_s", m.timers.session},
             {"trial_s", m.timers.trial},
             {"window_elapsed_s", m.timers.window_elapsed},
             {"window_remaining_s", m.timers.window_remaining}}}};
    return j;
}

json body_json(const CalibrationProbeMsg& m) {
    return {{"probe_id", m.probe_id},
            {"intensity_ma", m.intensity},
            {"phase", to_string(m.phase)},
            {"calibration", m.calibration}};
}

json body_json(const CalibrationResponseMsg& m) {
    return {{"probe_id", m.probe_id}, {"response", to_string(m.response)}};
}

json body_json(const FingerInput& m) { return {{"position", vec(m.position)}}; }

json body_json(const Control& m) { return {{"action", to_string(m.action)}}; }

json body_json(const Event& m) {
    return {{"kind", to_string(m.kind)},
            {"detail", m.detail},
            {"part", m.part},
            {"block", m.block},
            {"calibration", opt(m.calibration)},
            {"result", m.result ? result_json(*m.result) : json(nullptr)},
            {"valid", opt(m.valid)}};
}

json body_json(const Ack& m) { return {{"ack_seq", m.ack_seq}}; }

json body_json(const Error& m) { return {{"code", m.code}, {"message", m.message}, {"ref_seq", opt(m.ref_seq)}}; }

Snapshot snapshot_from(const json& j) {
    Snapshot m;
    const auto& f = j.at("fingertip");
    m.fingertip.real_pos = vec_from(f.at("real"), "fingertip.real");
    m.fingertip.avatar_pos = vec_from(f.at("avatar"), "fingertip.avatar");
    m.fingertip.in_contact = f.at("in_contact").get<bool>();
    m.fingertip.contact_object = opt_from<std::string>(f, "object");
    if (auto face = opt_from<std::string>(f, "face")) {
        bool found = false;
        for (std::size_t i = 0; i < kFaceNames.size(); ++i) {
            if (*face == kFaceNames[i]) {
                m.fingertip.contact_face = static_cast<BoxFace>(i);
                found = true;
            }
        }
        if (!found) bad("unknown face '" + *face + "'");
    }
    m.d = j.at("d").get<double>();
    m.d_hat = j.at("d_hat").get<double>();
    const auto& s = j.at("stimulus");
    m.stimulus = {s.at("intensity_ma").get<double>(), s.at("pulse_width_us").get<double>(),
                  s.at("frequency_hz").get<double>(), s.at("active").get<bool>()};
    if (!j.at("outline").is_null())
        m.outline = OutlineParams{j.at("outline").at("scale").get<double>(), j.at("outline").at("border_px").get<double>()};
    m.session_phase = j.at("session_phase").get<std::string>();
    m.trial_phase = j.at("trial_phase").get<std::string>();
    m.paused = j.at("paused").get<bool>();
    if (!j.at("condition").is_null())
        m.condition = Condition{feedback_mode_from_string(j.at("condition").at("feedback").get<std::string>()),
                                shading_from_string(j.at("condition").at("shading").get<std::string>())};
    m.part = j.at("part").get<int>();
    m.block = j.at("block").get<int>();
    m.repetition = j.at("repetition").get<int>();
    m.attempt = j.at("attempt").get<int>();
    m.calibration = opt_from<int>(j, "calibration");
    m.probe_id = opt_from<int>(j, "probe_id");
    m.working_intensity = j.at("working_intensity_ma").get<double>();
    const auto& t = j.at("timers");
    m.timers = {t.at("session_s").get<double>(), t.at("trial_s").get<double>(), t.at("window_elapsed_s").get<double>(),
                t.at("window_remaining_s").get<double>()};
    return m;
}

ControlAction action_from_string(const std::string& s) {
    for (auto a : {ControlAction::Start, ControlAction::Pause, ControlAction::Resume, ControlAction::Abort})
        if (s == to_string(a)) return a;
    bad("unknown control action '" + s + "'");
}

EventKind event_kind_from_string(const std::string& s) {
    for (int i = 0; i <= static_cast<int>(EventKind::Fault); ++i)
        if (s == to_string(static_cast<EventKind>(i))) return static_cast<EventKind>(i);
    bad("unknown event kind '" + s + "'");
}

Body body_from(const std::string& type, const json& j) {
    if (type == "hello") {
        Hello m;
        m.protocol = j.at("protocol").get<std::string>();
        m.role = j.value("role", std::string());
        if (auto mode = opt_from<std::string>(j, "mode")) m.mode = mode_from_string(*mode);
        return m;
    }
    if (type == "snapshot") return snapshot_from(j);
    if (type == "calibration_probe")
        return CalibrationProbeMsg{j.at("probe_id").get<int>(), j.at("intensity_ma").get<double>(),
                                   calibration_phase_from_string(j.at("phase").get<std::string>()),
                                   j.at("calibration").get<int>()};
    if (type == "calibration_response")
        return CalibrationResponseMsg{j.at("probe_id").get<int>(),
                                      subject_response_from_string(j.at("response").get<std::string>())};
    if (type == "finger_input") return FingerInput{vec_from(j.at("position"), "position")};
    if (type == "control") return Control{action_from_string(j.at("action").get<std::string>())};
    if (type == "event") {
        Event m;
        m.kind = event_kind_from_string(j.at("kind").get<std::string>());
        m.detail = j.value("detail", std::string());
        m.part = j.value("part", 0);
        m.block = j.value("block", 0);
        m.calibration = opt_from<int>(j, "calibration");
        if (j.contains("result") && !j.at("result").is_null()) {
            const auto& r = j.at("result");
            m.result = CalibrationResult{r.at("detection_threshold_ma").get<double>(),
                                         r.at("discomfort_threshold_ma").get<double>(),
                                         r.at("working_intensity_ma").get<double>()};
        }
        m.valid = opt_from<bool>(j, "valid");
        return m;
    }
    if (type == "ack") return Ack{j.at("ack_seq").get<std::uint64_t>()};
    if (type == "error")
        return Error{j.at("code").get<std::string>(), j.value("message", std::string()),
                     opt_from<std::uint64_t>(j, "ref_seq")};
    bad("unknown message type '" + type + "'");
}

}  // namespace

const char* to_string(Mode mode) { return mode == Mode::Synthetic ? "synthetic" : "operator"; }

Mode mode_from_string(const std::string& s) {
    if (s == "synthetic") return Mode::Synthetic;
    if (s == "operator") return Mode::Operator;
    throw ConfigError("unknown session mode '" + s + "'");
}

const char* to_string(ControlAction action) {
    switch (action) {
        case ControlAction::Start: return "start";
        case ControlAction::Pause: return "pause";
        case ControlAction::Resume: return "resume";
        case ControlAction::Abort: return "abort";
    }
    return "?";
}

const char* to_string(EventKind kind) {
    switch (kind) {
        case EventKind::Beep: return "beep";
        case EventKind::TrialStart: return "trial_start";
        case EventKind::TrialEnd: return "trial_end";
        case EventKind::BlockStart: return "block_start";
        case EventKind::BlockEnd: return "block_end";
        case EventKind::CalibrationStart: return "calibration_start";
        case EventKind::CalibrationEnd: return "calibration_end";
        case EventKind::SessionComplete: return "session_complete";
        case EventKind::SessionAborted: return "session_aborted";
        case EventKind::Fault: return "fault";
    }
    return "?";
}

const char* type_name(const Body& body) {
    return std::visit(detail::Overloaded{
                          [](const Hello&) { return "hello"; },
                          [](const Snapshot&) { return "snapshot"; },
                          [](const CalibrationProbeMsg&) { return "calibration_probe"; },
                          [](const CalibrationResponseMsg&) { return "calibration_response"; },
                          [](const FingerInput&) { return "finger_input"; },
                          [](const Control&) { return "control"; },
                          [](const Event&) { return "event"; },
                          [](const Ack&) { return "ack"; },
                          [](const Error&) { return "error"; },
                      },
                      body);
}

nlohmann::json to_json(const SessionMessage& msg) {
    json j = std::visit([](const auto& b) { return body_json(b); }, msg.body);
    j["type"] = type_name(msg.body);
    j["seq"] = msg.seq;
    j["session"] = msg.session_id;
    return j;
}

SessionMessage message_from_json(const nlohmann::json& j) {
    if (!j.is_object()) bad("message must be a JSON object");
    try {
        if (!j.contains("type") || !j.at("type").is_string()) bad("missing 'type'");
        if (!j.contains("seq") || !j.at("seq").is_number_unsigned()) bad("'seq' must be a non-negative integer");
        SessionMessage msg;
        msg.seq = j.at("seq").get<std::uint64_t>();
        msg.session_id = j.value("session", std::string());
        msg.body = body_from(j.at("type").get<std::string>(), j);
        return msg;
    } catch (const nlohmann::json::exception& e) {
        bad(e.what());
    } catch (const ConfigError& e) {
        bad(e.what());
    }
}

std::string encode_line(const SessionMessage& msg) {
    return to_json(msg).dump(-1, ' ', false, json::error_handler_t::replace) + '\n';
}

SessionMessage decode_line(std::string_view line) {
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);
    json j;
    try {
        j = json::parse(line.begin(), line.end());
    } catch (const json::exception& e) {
        throw MessageError("malformed", e.what());
    }
    return message_from_json(j);
}

}  // namespace etfb::session
