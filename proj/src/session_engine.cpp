#include "etfb/session_engine.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "etfb/detail/overloaded.hpp"

namespace etfb::session {
namespace {

constexpr double kTimeEps = 1e-9;

StimulusParams emitted(const DeviceState& s) { return s.running ? s.current_params : StimulusParams::off(); }

}  // namespace

struct SessionEngine::CalibrationStage {
    enum class Step { On, Await, Off };

    CalibrationStage(int index, const CalibrationConfig& cfg) : calibrator(cfg) {
        record.index = index;
        record.label = kCalibrationLabels[index];
    }

    Calibrator calibrator;
    CalibrationRecord record;
    std::optional<CalibrationProbe> probe;
    std::optional<SubjectResponse> response;
    Step step = Step::Off;
    double elapsed = 0.0;
    bool started = false;
};

struct SessionEngine::TrialStage {
    TrialStage(int pid, const PlanEntry& entry, int attempt, const TrialContext& ctx)
        : runner(pid, entry, attempt, ctx) {}
    TrialRunner runner;
};

SessionEngine::SessionEngine(EngineOptions options)
    : options_(std::move(options)),
      renderer_(options_.config.modulation, device_, options_.deadband),
      ctx_{options_.config.scene, options_.config.harness, renderer_, device_} {
    auto& cfg = options_.config;
    cfg.harness.validate();
    cfg.calibration.validate();
    cfg.modulation.validate();
    cfg.layout.validate();
    if (options_.session_id.empty())
        options_.session_id = fmt::format("p{}-s{}", options_.participant_id, cfg.seed);
    if (options_.mode == Mode::Synthetic)
        subject_ = std::make_unique<SubjectModel>(participant_subject(cfg, options_.participant_id));

    for (const auto& channel : cfg.layout.channel_configs()) device_.execute(protocol::SetChannelMode{channel});

    dataset_.participant_id = options_.participant_id;
    dataset_.seed = cfg.seed;
    dataset_.plan = build_plan(options_.participant_id, cfg.seed);
    if (options_.autostart) start();
}

SessionEngine::~SessionEngine() = default;

SessionMessage SessionEngine::stamp(Body body) { return {next_seq_++, options_.session_id, std::move(body)}; }

void SessionEngine::submit(SessionMessage msg, std::uint64_t source) { inbox_.emplace_back(std::move(msg), source); }

void SessionEngine::emit(Body body) { out_.push_back({stamp(std::move(body)), std::nullopt}); }

void SessionEngine::reply(Body body, std::uint64_t source) { out_.push_back({stamp(std::move(body)), source}); }

void SessionEngine::error(std::string code, std::string message, std::optional<std::uint64_t> ref,
                          std::uint64_t source) {
    reply(Error{std::move(code), std::move(message), ref}, source);
}

std::vector<Outbound> SessionEngine::tick() {
    while (!inbox_.empty()) {
        auto [msg, source] = std::move(inbox_.front());
        inbox_.pop_front();
        apply(msg, source);
    }
    if (!paused_ && !finished() && phase_ != "idle") {
        step();
        clock_ += dt();
    }
    last_snapshot_ = snapshot();
    emit(*last_snapshot_);
    return std::exchange(out_, {});
}

void SessionEngine::apply(const SessionMessage& msg, std::uint64_t source) {
    auto& last = last_input_seq_[source];
    if (msg.seq <= last) {
        error("stale_seq", fmt::format("seq {} not greater than {}", msg.seq, last), msg.seq, source);
        return;
    }
    last = msg.seq;
    if (!msg.session_id.empty() && msg.session_id != options_.session_id) {
        error("wrong_session", "message for session '" + msg.session_id + "'", msg.seq, source);
        return;
    }

    auto operator_only = [&]() {
        if (options_.mode == Mode::Operator) return true;
        error("not_operator_mode", std::string(type_name(msg.body)) + " requires operator mode", msg.seq, source);
        return false;
    };

    const bool ok = std::visit(
        detail::Overloaded{
            [&](const Hello&) { return true; },
            [&](const FingerInput& m) {
                if (!operator_only()) return false;
                finger_ = m.position;
                return true;
            },
            [&](const CalibrationResponseMsg& m) {
                if (!operator_only()) return false;
                if (!calibration_ || !calibration_->probe) {
                    error("no_probe", "no calibration probe is outstanding", msg.seq, source);
                    return false;
                }
                if (m.probe_id != calibration_->probe->id) {
                    error("wrong_probe", fmt::format("probe {} is outstanding, not {}", calibration_->probe->id, m.probe_id),
                          msg.seq, source);
                    return false;
                }
                if (calibration_->response) {
                    error("duplicate_response", fmt::format("probe {} already answered", m.probe_id), msg.seq, source);
                    return false;
                }
                calibration_->response = m.response;
                return true;
            },
            [&](const Control& m) {
                switch (m.action) {
                    case ControlAction::Start:
                        if (phase_ != "idle") {
                            error("already_started", "session already started", msg.seq, source);
                            return false;
                        }
                        start();
                        return true;
                    case ControlAction::Pause:
                        if (finished()) break;
                        paused_ = true;
                        renderer_.stop();
                        return true;
                    case ControlAction::Resume:
                        if (finished()) break;
                        paused_ = false;
                        return true;
                    case ControlAction::Abort:
                        if (finished()) break;
                        abort("aborted by operator");
                        return true;
                }
                error("finished", "session already finished", msg.seq, source);
                return false;
            },
            [&](const auto&) {
                error("unexpected_type", std::string(type_name(msg.body)) + " is not accepted from clients", msg.seq,
                      source);
                return false;
            },
        },
        msg.body);
    if (ok) reply(Ack{msg.seq}, source);
}

void SessionEngine::start() {
    if (phase_ != "idle") return;
    begin_calibration(0);
}

void SessionEngine::abort(const std::string& reason) {
    if (trial_) {
        dataset_.trials.push_back(trial_->runner.finish());
        trial_.reset();
    }
    if (calibration_) {
        calibration_->record.session = calibration_->calibrator.session();
        if (calibration_->record.status == "ok") {
            calibration_->record.status = "aborted";
            calibration_->record.error = reason;
        }
        dataset_.calibrations.push_back(calibration_->record);
        calibration_.reset();
    }
    if (device_.state().running) device_.execute(protocol::Stop{});
    dataset_.status = "aborted";
    dataset_.error = reason;
    dataset_.stimulation_exposure = device_.stimulation_time();
    phase_ = "aborted";
    paused_ = false;
    emit(Event{EventKind::SessionAborted, reason, part_, block_, std::nullopt, std::nullopt, std::nullopt});
}

void SessionEngine::step() {
    if (calibration_) {
        step_calibration();
    } else if (trial_) {
        step_trial();
    }
}

void SessionEngine::begin_calibration(int index) {
    if (subject_ && index > 0) {
        subject_->habituate((device_.stimulation_time() - exposure_mark_) / 3600.0);
        exposure_mark_ = device_.stimulation_time();
    }
    calibration_ = std::make_unique<CalibrationStage>(index, options_.config.calibration);
    if (subject_) {
        calibration_->record.true_detect = subject_->detect_threshold();
        calibration_->record.true_discomfort = subject_->discomfort_threshold();
    }
    calibration_->elapsed = options_.config.calibration.probe_off_time;
    phase_ = "calibration";
    emit(Event{EventKind::CalibrationStart, calibration_->record.label, part_, 0, index, std::nullopt, std::nullopt});
}

void SessionEngine::step_calibration() {
    using Step = CalibrationStage::Step;
    auto& c = *calibration_;
    const auto& cfg = options_.config.calibration;
    try {
        if (c.step == Step::Off && c.elapsed >= cfg.probe_off_time - kTimeEps) {
            c.probe = c.calibrator.next_probe();
            if (!c.probe) {
                end_calibration();
                return;
            }
            c.response.reset();
            for (const protocol::Command& cmd :
                 {protocol::Command{protocol::make_set_stimulus(quantize_for_device(c.probe->params))},
                  protocol::Command{protocol::Start{}}}) {
                const auto r = device_.execute(cmd);
                if (!r.accepted) {
                    emit(Event{EventKind::Fault, r.error, part_, 0, c.record.index, std::nullopt, std::nullopt});
                    abort("device fault: " + r.error);
                    return;
                }
            }
            emit(CalibrationProbeMsg{c.probe->id, c.probe->params.intensity, c.probe->phase, c.record.index});
            c.step = Step::On;
            c.elapsed = 0.0;
        }

        switch (c.step) {
            case Step::On:
                device_.advance(dt());
                c.elapsed += dt();
                if (c.elapsed < cfg.probe_on_time - kTimeEps) return;
                device_.execute(protocol::Stop{});
                if (subject_) c.response = subject_->respond(c.probe->params);
                c.step = Step::Await;
                [[fallthrough]];
            case Step::Await:
                if (!c.response) return;
                c.calibrator.record_response(c.probe->id, *c.response);
                c.probe.reset();
                c.step = Step::Off;
                c.elapsed = 0.0;
                return;
            case Step::Off:
                device_.advance(dt());
                c.elapsed += dt();
                return;
        }
    } catch (const CalibrationError& e) {
        c.record.status = e.kind() == CalibrationError::Kind::Invalid ? "invalid" : "aborted";
        c.record.error = e.what();
        abort(c.record.label + ": " + e.what());
    }
}

void SessionEngine::end_calibration() {
    auto& c = *calibration_;
    c.record.result = c.calibrator.finalize();
    c.record.session = c.calibrator.session();
    working_intensity_ = c.record.result->working_intensity;
    renderer_.set_working_intensity(working_intensity_);
    const int index = c.record.index;
    emit(Event{EventKind::CalibrationEnd, c.record.label, part_, 0, index, c.record.result, std::nullopt});
    dataset_.calibrations.push_back(std::move(c.record));
    calibration_.reset();

    if (index < kParts) {
        part_ = index + 1;
        block_ = 1;
        phase_ = "trials";
        begin_block();
    } else {
        phase_ = "complete";
        dataset_.stimulation_exposure = device_.stimulation_time();
        emit(Event{EventKind::SessionComplete, "", part_, block_, std::nullopt, std::nullopt, std::nullopt});
    }
}

void SessionEngine::begin_block() {
    queue_.clear();
    for (const auto& entry : dataset_.plan.entries)
        if (entry.part == part_ && entry.block == block_) queue_.emplace_back(entry, 1);
    emit(Event{EventKind::BlockStart, to_string(dataset_.plan.blocks[part_ - 1][block_ - 1].feedback), part_, block_,
               std::nullopt, std::nullopt, std::nullopt});
    begin_next_trial();
}

void SessionEngine::begin_next_trial() {
    if (queue_.empty()) {
        emit(Event{EventKind::BlockEnd, "", part_, block_, std::nullopt, std::nullopt, std::nullopt});
        if (block_ < kBlocksPerPart) {
            ++block_;
            begin_block();
        } else {
            begin_calibration(part_);
        }
        return;
    }
    const auto [entry, attempt] = queue_.front();
    queue_.pop_front();
    trial_ = std::make_unique<TrialStage>(options_.participant_id, entry, attempt, ctx_);
    last_step_.reset();
    emit(Event{EventKind::TrialStart, fmt::format("repetition {} attempt {}", entry.repetition, attempt), part_, block_,
               std::nullopt, std::nullopt, std::nullopt});
    emit(Event{EventKind::Beep, "start", part_, block_, std::nullopt, std::nullopt, std::nullopt});
}

void SessionEngine::step_trial() {
    auto& runner = trial_->runner;
    const TrialStep s = subject_ ? runner.step(*subject_) : runner.step(finger_.value_or(options_.config.scene.rest_center));
    last_step_ = s;
    if (s.frame.device_fault)
        emit(Event{EventKind::Fault, *s.frame.device_fault, part_, block_, std::nullopt, std::nullopt, std::nullopt});
    if (s.window_closed) emit(Event{EventKind::Beep, "end", part_, block_, std::nullopt, std::nullopt, std::nullopt});
    if (s.finished) end_trial();
}

void SessionEngine::end_trial() {
    TrialRecord record = trial_->runner.finish();
    trial_.reset();
    if (!record.valid && record.attempt <= options_.config.harness.max_retries)
        queue_.emplace_back(record.entry, record.attempt + 1);
    emit(Event{EventKind::TrialEnd, record.invalid_reason, part_, block_, std::nullopt, std::nullopt, record.valid});
    dataset_.trials.push_back(std::move(record));
    begin_next_trial();
}

Snapshot SessionEngine::snapshot() const {
    Snapshot s;
    s.session_phase = phase_;
    s.paused = paused_;
    s.part = phase_ == "idle" ? 0 : part_;
    s.working_intensity = working_intensity_;
    s.stimulus = emitted(device_.state());
    s.timers.session = clock_;
    const Vec3 rest = options_.config.scene.rest_center;
    s.fingertip = FingertipState::free_at(options_.mode == Mode::Operator ? finger_.value_or(rest) : rest);

    if (calibration_) {
        s.calibration = calibration_->record.index;
        if (calibration_->probe && !calibration_->response) s.probe_id = calibration_->probe->id;
    }
    if (trial_) {
        const auto& runner = trial_->runner;
        const auto& cfg = options_.config.harness;
        s.block = block_;
        s.condition = runner.entry().condition;
        s.repetition = runner.entry().repetition;
        s.attempt = runner.attempt();
        s.trial_phase = to_string(runner.tracker().phase());
        s.timers.trial = runner.time();
        s.timers.window_elapsed = runner.tracker().window_elapsed();
        s.timers.window_remaining = std::max(0.0, cfg.window_duration - s.timers.window_elapsed);
        if (last_step_) {
            s.fingertip = last_step_->fingertip;
            s.d = last_step_->sample.d;
            s.d_hat = last_step_->sample.d_hat;
            s.outline = last_step_->frame.outline;
        }
    }
    return s;
}

}  // namespace etfb::session
