#include <doctest.h>

#include <algorithm>

#include "etfb/config.hpp"
#include "etfb/session_engine.hpp"

using namespace etfb;
using namespace etfb::session;

namespace {

SessionConfig canonical() { return load_session_config(ETFB_CONFIG_DIR "/session.json"); }

EngineOptions options(Mode mode, int pid = 0, bool autostart = false) {
    EngineOptions o;
    o.config = canonical();
    o.participant_id = pid;
    o.mode = mode;
    o.autostart = autostart;
    return o;
}

template <class T>
std::vector<T> bodies(const std::vector<Outbound>& out) {
    std::vector<T> v;
    for (const auto& o : out)
        if (const auto* b = std::get_if<T>(&o.message.body)) v.push_back(*b);
    return v;
}

std::optional<Error> first_error(const std::vector<Outbound>& out) {
    const auto errs = bodies<Error>(out);
    if (errs.empty()) return std::nullopt;
    return errs.front();
}

SubjectResponse observer(double intensity) {
    if (intensity >= 2.95) return SubjectResponse::Discomfort;
    if (intensity >= 1.15) return SubjectResponse::Felt;
    return SubjectResponse::NotFelt;
}

// Operator-side client: answers probes like the canonical subject and keeps its own seq.
struct Client {
    SessionEngine& engine;
    std::uint64_t seq = 0;
    std::uint64_t source = 1;

    void send(Body body) { engine.submit({++seq, engine.session_id(), std::move(body)}, source); }

    // Tick until the current calibration ends; returns all output.
    std::vector<Outbound> run_calibration() {
        std::vector<Outbound> all;
        for (int i = 0; i < 100000; ++i) {
            auto out = engine.tick();
            bool ended = false;
            for (const auto& o : out) {
                if (const auto* p = std::get_if<CalibrationProbeMsg>(&o.message.body))
                    send(CalibrationResponseMsg{p->probe_id, observer(p->intensity)});
                if (const auto* e = std::get_if<Event>(&o.message.body))
                    ended |= e->kind == EventKind::CalibrationEnd || e->kind == EventKind::SessionAborted;
            }
            all.insert(all.end(), out.begin(), out.end());
            if (ended) return all;
        }
        FAIL("calibration did not end");
        return all;
    }
};

std::vector<Outbound> run_to_end(SessionEngine& engine) {
    std::vector<Outbound> all;
    while (!engine.finished()) {
        auto out = engine.tick();
        all.insert(all.end(), std::make_move_iterator(out.begin()), std::make_move_iterator(out.end()));
    }
    return all;
}

}  // namespace

TEST_CASE("synthetic session reproduces the offline runner") {
    SessionEngine engine(options(Mode::Synthetic, 1, true));
    const auto out = run_to_end(engine);
    CHECK(engine.phase() == "complete");
    const auto offline = run_session(1, canonical());
    const auto& ds = engine.dataset();
    REQUIRE(ds.trials.size() == offline.trials.size());
    for (std::size_t i = 0; i < ds.trials.size(); ++i) {
        CHECK(ds.trials[i].metrics.avg_d == offline.trials[i].metrics.avg_d);
        CHECK(ds.trials[i].valid == offline.trials[i].valid);
        CHECK(ds.trials[i].stimulus_commands == offline.trials[i].stimulus_commands);
    }
    REQUIRE(ds.calibrations.size() == 3);
    for (int i = 0; i < 3; ++i) CHECK(ds.calibrations[i].result == offline.calibrations[i].result);

    // Sequence numbers are strictly increasing across everything the engine sent.
    for (std::size_t i = 1; i < out.size(); ++i) REQUIRE(out[i].message.seq > out[i - 1].message.seq);
    for (const auto& o : out) REQUIRE(o.message.session_id == "p1-s1");

    const auto events = bodies<Event>(out);
    auto count = [&](EventKind k) { return std::count_if(events.begin(), events.end(), [&](auto& e) { return e.kind == k; }); };
    CHECK(count(EventKind::CalibrationStart) == 3);
    CHECK(count(EventKind::CalibrationEnd) == 3);
    CHECK(count(EventKind::BlockStart) == 8);
    CHECK(count(EventKind::TrialEnd) == static_cast<long>(ds.trials.size()));
    CHECK(count(EventKind::SessionComplete) == 1);
    CHECK(bodies<CalibrationProbeMsg>(out).size() ==
          ds.calibrations[0].session.probes_issued + ds.calibrations[1].session.probes_issued +
              ds.calibrations[2].session.probes_issued);
}

TEST_CASE("snapshots: one per tick, stimulation bounded by the working intensity, none under None/Visual") {
    SessionEngine engine(options(Mode::Synthetic, 0, true));
    std::size_t ticks = 0, snaps = 0;
    while (!engine.finished()) {
        const auto out = engine.tick();
        ++ticks;
        const auto s = bodies<Snapshot>(out);
        snaps += s.size();
        REQUIRE(s.size() == 1);
        const auto& snap = s[0];
        if (snap.session_phase == "trials" && snap.condition) {
            if (!snap.condition->electrotactile()) REQUIRE_FALSE(snap.stimulus.active);
            if (snap.stimulus.active) REQUIRE(snap.stimulus.intensity <= snap.working_intensity + 1e-9);
            if (snap.timers.trial > 0.0) REQUIRE(snap.outline.has_value() == snap.condition->visual());
        }
    }
    CHECK(snaps == ticks);
    for (const auto& t : engine.dataset().trials)
        if (!t.entry.condition.electrotactile()) CHECK(t.stimulus_commands == 0);
}

TEST_CASE("engines with the same options emit identical streams") {
    SessionEngine a(options(Mode::Synthetic, 3, true));
    SessionEngine b(options(Mode::Synthetic, 3, true));
    for (int i = 0; i < 20000; ++i) {
        const auto x = a.tick();
        const auto y = b.tick();
        REQUIRE(x.size() == y.size());
        for (std::size_t k = 0; k < x.size(); ++k) REQUIRE(encode_line(x[k].message) == encode_line(y[k].message));
    }
}

TEST_CASE("idle until started") {
    SessionEngine engine(options(Mode::Synthetic));
    for (int i = 0; i < 10; ++i) engine.tick();
    CHECK(engine.phase() == "idle");
    CHECK(engine.time() == 0.0);
    engine.submit({1, "", Control{ControlAction::Start}}, 4);
    const auto out = engine.tick();
    CHECK(engine.phase() == "calibration");
    REQUIRE(bodies<Ack>(out).size() == 1);
    CHECK(bodies<Ack>(out)[0].ack_seq == 1);
    for (const auto& o : out)
        if (std::holds_alternative<Ack>(o.message.body)) CHECK(o.reply_to == std::optional<std::uint64_t>(4));
    engine.submit({2, "", Control{ControlAction::Start}}, 4);
    CHECK(first_error(engine.tick())->code == "already_started");
}

TEST_CASE("input validation errors") {
    SessionEngine engine(options(Mode::Synthetic, 0, true));
    engine.submit({5, "", Control{ControlAction::Pause}}, 1);
    engine.tick();
    engine.submit({5, "", Control{ControlAction::Resume}}, 1);
    auto e = first_error(engine.tick());
    REQUIRE(e);
    CHECK(e->code == "stale_seq");
    CHECK(e->ref_seq == std::optional<std::uint64_t>(5));
    // Per-source counters.
    engine.submit({1, "", Control{ControlAction::Resume}}, 2);
    CHECK_FALSE(first_error(engine.tick()));

    engine.submit({6, "someone-else", Control{ControlAction::Pause}}, 1);
    CHECK(first_error(engine.tick())->code == "wrong_session");
    engine.submit({7, "", FingerInput{{0, 0, 0}}}, 1);
    CHECK(first_error(engine.tick())->code == "not_operator_mode");
    engine.submit({8, "", CalibrationResponseMsg{1, SubjectResponse::Felt}}, 1);
    CHECK(first_error(engine.tick())->code == "not_operator_mode");
    engine.submit({9, "", Snapshot{}}, 1);
    CHECK(first_error(engine.tick())->code == "unexpected_type");
    engine.submit({10, "", Ack{1}}, 1);
    CHECK(first_error(engine.tick())->code == "unexpected_type");
    engine.submit({11, "", Hello{}}, 1);
    const auto out = engine.tick();
    CHECK_FALSE(first_error(out));
    CHECK(bodies<Ack>(out).size() == 1);
}

TEST_CASE("pause freezes the session clock and stops stimulation") {
    SessionEngine engine(options(Mode::Synthetic, 0, true));
    for (int i = 0; i < 50; ++i) engine.tick();  // inside the first probe
    CHECK(engine.device().state().running);
    engine.submit({1, "", Control{ControlAction::Pause}});
    engine.tick();
    const double t = engine.time();
    CHECK(engine.paused());
    CHECK_FALSE(engine.device().state().running);
    for (int i = 0; i < 100; ++i) engine.tick();
    CHECK(engine.time() == t);
    CHECK(engine.last_snapshot()->paused);
    engine.submit({2, "", Control{ControlAction::Resume}});
    engine.tick();
    CHECK(engine.time() > t);
}

TEST_CASE("abort records the partial state and rejects later control") {
    SessionEngine engine(options(Mode::Synthetic, 0, true));
    for (int i = 0; i < 200; ++i) engine.tick();
    engine.submit({1, "", Control{ControlAction::Abort}});
    const auto out = engine.tick();
    CHECK(engine.phase() == "aborted");
    CHECK(engine.finished());
    CHECK(engine.dataset().status == "aborted");
    REQUIRE(engine.dataset().calibrations.size() == 1);
    CHECK(engine.dataset().calibrations[0].status == "aborted");
    CHECK_FALSE(engine.device().state().running);
    const auto events = bodies<Event>(out);
    CHECK(std::any_of(events.begin(), events.end(), [](auto& e) { return e.kind == EventKind::SessionAborted; }));
    engine.submit({2, "", Control{ControlAction::Pause}});
    CHECK(first_error(engine.tick())->code == "finished");
}

TEST_CASE("operator calibration waits for responses and validates probe ids") {
    SessionEngine engine(options(Mode::Operator, 0, true));
    Client client{engine};
    // Inputs are applied before the first probe goes out in the same tick.
    client.send(CalibrationResponseMsg{1, SubjectResponse::Felt});
    const auto first = engine.tick();
    CHECK(first_error(first)->code == "no_probe");
    const auto probes = bodies<CalibrationProbeMsg>(first);
    REQUIRE(probes.size() == 1);
    const auto probe = probes[0];
    CHECK(probe.probe_id == 1);
    CHECK(probe.intensity == doctest::Approx(0.1));
    // Without a response the engine waits indefinitely.
    for (int i = 0; i < 500; ++i) engine.tick();
    CHECK(engine.last_snapshot()->probe_id == std::optional<int>(1));
    CHECK(engine.dataset().calibrations.empty());

    client.send(CalibrationResponseMsg{2, SubjectResponse::Felt});
    CHECK(first_error(engine.tick())->code == "wrong_probe");
    client.send(CalibrationResponseMsg{1, SubjectResponse::NotFelt});
    client.send(CalibrationResponseMsg{1, SubjectResponse::NotFelt});
    const auto out = engine.tick();
    CHECK(bodies<Ack>(out).size() == 1);
    CHECK(first_error(out)->code == "duplicate_response");
}

TEST_CASE("operator mode: a full calibration then a fingertip step to full depth") {
    // Participant 2 starts with the electrotactile block.
    SessionEngine engine(options(Mode::Operator, 2, true));
    REQUIRE(build_plan(2, 1).blocks[0][0].feedback == FeedbackMode::Electrotactile);
    Client client{engine};
    const auto cal = client.run_calibration();
    const auto events = bodies<Event>(cal);
    const auto end = std::find_if(events.begin(), events.end(), [](auto& e) { return e.kind == EventKind::CalibrationEnd; });
    REQUIRE(end != events.end());
    REQUIRE(end->result);
    CHECK(end->result->working_intensity == doctest::Approx(2.1));
    CHECK(engine.phase() == "trials");

    const Vec3 top = canonical().scene.contact_point();
    client.send(FingerInput{top + Vec3{0.0, 0.01, 0.0}});
    engine.tick();
    engine.tick();
    const auto mark = engine.device().log().size();

    client.send(FingerInput{top - Vec3{0.0, 0.03, 0.0}});
    const auto out = engine.tick();
    const auto snap = bodies<Snapshot>(out).at(0);
    CHECK(snap.d_hat == doctest::Approx(1.0));
    CHECK(snap.stimulus == StimulusParams{2.1, 500.0, 200.0, true});
    const auto& log = engine.device().log();
    std::size_t set = 0;
    for (std::size_t i = mark; i < log.size(); ++i) set += log[i].opcode == protocol::Opcode::SetStimulus;
    CHECK(set == 1);
    CHECK(log[mark].description == "SetStimulus(2.1 mA, 500 us, 200 Hz)");

    // Stationary fingertip: no further device traffic.
    const auto held = log.size();
    for (int i = 0; i < 100; ++i) engine.tick();
    CHECK(engine.device().log().size() == held);
    CHECK(engine.last_snapshot()->trial_phase == "in_window");

    // The trial ends on its own after the window and the return time.
    for (int i = 0; i < 1000 && engine.dataset().trials.empty(); ++i) engine.tick();
    REQUIRE(engine.dataset().trials.size() == 1);
    CHECK(engine.dataset().trials[0].valid);
    CHECK(engine.dataset().trials[0].metrics.avg_d == doctest::Approx(0.03));
    client.send(FingerInput{canonical().scene.rest_center});
    engine.tick();
    CHECK_FALSE(engine.device().state().running);
    CHECK(engine.last_snapshot()->repetition == 2);
}

TEST_CASE("stamp shares the engine sequence") {
    SessionEngine engine(options(Mode::Synthetic));
    const auto a = engine.stamp(Hello{"1", "service", Mode::Synthetic});
    const auto out = engine.tick();
    CHECK(out.front().message.seq == a.seq + 1);
    CHECK(engine.session_id() == "p0-s1");
}
