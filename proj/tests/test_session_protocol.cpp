#include <doctest.h>

#include <nlohmann/json.hpp>

#include "etfb/session_protocol.hpp"

using namespace etfb;
using namespace etfb::session;

namespace {

SessionMessage msg(Body body, std::uint64_t seq = 7) { return {seq, "p0-s1", std::move(body)}; }

Snapshot sample_snapshot() {
    Snapshot s;
    s.fingertip.real_pos = {0.1, 0.14, 0.0};
    s.fingertip.avatar_pos = {0.1, 0.15, 0.0};
    s.fingertip.in_contact = true;
    s.fingertip.contact_object = "cube";
    s.fingertip.contact_face = BoxFace::PosY;
    s.d = 0.01;
    s.d_hat = 1.0 / 3.0;
    s.stimulus = {2.1, 300.0, 56.0, true};
    s.outline = OutlineParams{1.0666, 2.3333};
    s.session_phase = "trials";
    s.trial_phase = "in_window";
    s.condition = Condition{FeedbackMode::VisuoElectrotactile, Shading::Wireframe};
    s.part = 2;
    s.block = 3;
    s.repetition = 4;
    s.attempt = 1;
    s.working_intensity = 2.1;
    s.timers = {100.5, 2.0, 0.5, 2.5};
    return s;
}

void check_error(std::string_view line, const std::string& code) {
    try {
        decode_line(line);
        FAIL("decoded: " << line);
    } catch (const MessageError& e) {
        CHECK(e.code() == code);
    }
}

}  // namespace

TEST_CASE("every message type round-trips") {
    Event ev;
    ev.kind = EventKind::CalibrationEnd;
    ev.detail = "before_part1";
    ev.calibration = 0;
    ev.result = CalibrationResult{1.2, 3.0, 2.1};
    Event end;
    end.kind = EventKind::TrialEnd;
    end.valid = false;
    end.part = 1;
    end.block = 2;
    const std::vector<Body> bodies{Hello{"1", "operator", std::nullopt},
                                   Hello{"1", "service", Mode::Synthetic},
                                   sample_snapshot(),
                                   Snapshot{},
                                   CalibrationProbeMsg{4, 0.4, CalibrationPhase::AscendDetect, 1},
                                   CalibrationResponseMsg{4, SubjectResponse::Discomfort},
                                   FingerInput{{0.1, -0.2, 0.3}},
                                   Control{ControlAction::Pause},
                                   Control{ControlAction::Abort},
                                   ev,
                                   end,
                                   Ack{12},
                                   Error{"stale_seq", "seq 3 <= 5", 3},
                                   Error{"malformed", "x", std::nullopt}};
    for (const auto& b : bodies) {
        const auto m = msg(b);
        const auto line = encode_line(m);
        CHECK(line.back() == '\n');
        CHECK(std::count(line.begin(), line.end(), '\n') == 1);
        CHECK(decode_line(line) == m);
        CHECK(message_from_json(to_json(m)) == m);
    }
}

TEST_CASE("envelope fields") {
    const auto j = to_json(msg(Ack{3}, 42));
    CHECK(j.at("type") == "ack");
    CHECK(j.at("seq") == 42);
    CHECK(j.at("session") == "p0-s1");
    CHECK(j.at("ack_seq") == 3);
}

TEST_CASE("snapshot wire layout") {
    const auto j = to_json(msg(sample_snapshot()));
    CHECK(j.at("fingertip").at("face") == "+y");
    CHECK(j.at("fingertip").at("real").size() == 3);
    CHECK(j.at("stimulus").at("pulse_width_us") == 300.0);
    CHECK(j.at("outline").at("border_px") == 2.3333);
    CHECK(j.at("condition").at("feedback") == to_string(FeedbackMode::VisuoElectrotactile));
    CHECK(j.at("timers").at("window_remaining_s") == 2.5);
    CHECK(j.at("calibration").is_null());
}

TEST_CASE("client messages decode from hand-written lines") {
    const auto hello = decode_line(R"({"type":"hello","seq":1,"session":"","protocol":"1","role":"operator"})");
    CHECK(std::get<Hello>(hello.body).role == "operator");
    const auto finger = decode_line("{\"type\":\"finger_input\",\"seq\":2,\"position\":[0,0.1,0.2]}\r\n");
    CHECK(std::get<FingerInput>(finger.body).position == Vec3{0.0, 0.1, 0.2});
    CHECK(finger.session_id.empty());
    const auto resp = decode_line(R"({"type":"calibration_response","seq":3,"probe_id":9,"response":"felt"})");
    CHECK(std::get<CalibrationResponseMsg>(resp.body) == CalibrationResponseMsg{9, SubjectResponse::Felt});
    const auto ctl = decode_line(R"({"type":"control","seq":4,"action":"resume"})");
    CHECK(std::get<Control>(ctl.body).action == ControlAction::Resume);
}

TEST_CASE("decode errors carry stable codes") {
    check_error("not json", "malformed");
    check_error("{\"type\":", "malformed");
    check_error("", "malformed");
    check_error("[1,2]", "bad_message");
    check_error(R"({"seq":1})", "bad_message");
    check_error(R"({"type":"ack"})", "bad_message");
    check_error(R"({"type":"ack","seq":-1,"ack_seq":1})", "bad_message");
    check_error(R"({"type":"ack","seq":1.5,"ack_seq":1})", "bad_message");
    check_error(R"({"type":"teleport","seq":1})", "bad_message");
    check_error(R"({"type":"control","seq":1,"action":"explode"})", "bad_message");
    check_error(R"({"type":"calibration_response","seq":1,"probe_id":1,"response":"maybe"})", "bad_message");
    check_error(R"({"type":"finger_input","seq":1,"position":[0,0]})", "bad_message");
    check_error(R"({"type":"finger_input","seq":1,"position":[0,"a",0]})", "bad_message");
    check_error(R"({"type":"finger_input","seq":1,"position":[0,1e999,0]})", "malformed");
    check_error(R"({"type":"hello","seq":1})", "bad_message");
}

TEST_CASE("invalid UTF-8 in strings is replaced on output") {
    const auto line = encode_line(msg(Error{"x", std::string("bad \xff byte"), std::nullopt}));
    const auto back = decode_line(line);
    CHECK(std::get<Error>(back.body).message != "bad \xff byte");
}

TEST_CASE("names") {
    CHECK(std::string(type_name(Body{Snapshot{}})) == "snapshot");
    CHECK(std::string(type_name(Body{CalibrationProbeMsg{}})) == "calibration_probe");
    CHECK(mode_from_string("operator") == Mode::Operator);
    CHECK(std::string(to_string(EventKind::SessionComplete)) == "session_complete");
}
