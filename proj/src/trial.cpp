#include "etfb/trial.hpp"

#include <cmath>

namespace etfb {
namespace {

constexpr double kTimeEps = 1e-9;
// Lift from the press point back to the hover point before transport to rest.
constexpr double kLiftTime = 0.3;

Vec3 blend(const Vec3& from, const Vec3& to, double tau) { return from + minimum_jerk(tau) * (to - from); }

}  // namespace

const char* to_string(TrialPhase phase) {
    switch (phase) {
        case TrialPhase::WaitingContact: return "waiting_contact";
        case TrialPhase::InWindow: return "in_window";
        case TrialPhase::WindowDone: return "window_done";
        case TrialPhase::Invalid: return "invalid";
    }
    return "?";
}

TrialTracker::TrialTracker(const HarnessConfig& cfg) : cfg_(cfg) {}

double TrialTracker::window_elapsed() const { return window_samples_ / cfg_.tick_rate; }

TrialPhase TrialTracker::update(const InterpenetrationSample& sample, bool in_contact) {
    switch (phase_) {
        case TrialPhase::WindowDone:
        case TrialPhase::Invalid: return phase_;
        case TrialPhase::WaitingContact:
            if (!in_contact) {
                if (sample.t > cfg_.contact_timeout + kTimeEps) {
                    phase_ = TrialPhase::Invalid;
                    invalid_reason_ = "no contact before timeout";
                }
                return phase_;
            }
            events_.contact_start = sample.t;
            phase_ = TrialPhase::InWindow;
            break;
        case TrialPhase::InWindow: break;
    }

    if (!in_contact) {
        if (!lost_since_) lost_since_ = sample.t;
        if (sample.t - *lost_since_ > cfg_.contact_grace + kTimeEps) {
            phase_ = TrialPhase::Invalid;
            invalid_reason_ = "contact lost beyond grace period";
        }
        return phase_;
    }

    lost_since_.reset();
    samples_.push_back(sample);
    metrics_.add(sample.d);
    if (++window_samples_ >= cfg_.window_ticks()) {
        events_.end_beep = sample.t;
        phase_ = TrialPhase::WindowDone;
    }
    return phase_;
}

SyntheticReach::SyntheticReach(const SceneSpec& scene, const HarnessConfig& cfg)
    : cfg_(cfg),
      rest_(scene.rest_center),
      contact_(scene.contact_point()),
      hover_(scene.contact_point() + Vec3{0.0, cfg.hover_height, 0.0}),
      last_(scene.rest_center) {}

Vec3 SyntheticReach::position(double t, double feedback_strength, SubjectModel& subject) {
    const double t_descent = cfg_.transport_time;
    const double t_hold = cfg_.transport_time + cfg_.descent_time;
    if (release_time_) {
        const double since = t - *release_time_;
        last_ = since < kLiftTime ? blend(release_pos_, hover_, since / kLiftTime)
                                  : blend(hover_, rest_, (since - kLiftTime) / cfg_.return_time);
    } else if (t < t_descent) {
        last_ = blend(rest_, hover_, t / cfg_.transport_time);
    } else if (t < t_hold) {
        last_ = blend(hover_, contact_, (t - t_descent) / cfg_.descent_time);
    } else {
        const double depth = subject.steer(feedback_strength, cfg_.nominal_depth);
        last_ = contact_ - Vec3{0.0, depth, 0.0};
    }
    return last_;
}

void SyntheticReach::release(double t) {
    release_time_ = t;
    release_pos_ = last_;
}

bool SyntheticReach::returned(double t) const {
    return release_time_ && t - *release_time_ >= kLiftTime + cfg_.return_time - kTimeEps;
}

double feedback_strength(const Condition& condition, double d_hat) {
    // Visual and electrotactile strengths are both d_hat, so the combined
    // condition's max of the two is d_hat as well.
    return condition.feedback == FeedbackMode::None ? 0.0 : d_hat;
}

TrialRunner::TrialRunner(int participant_id, const PlanEntry& entry, int attempt, const TrialContext& ctx)
    : ctx_(ctx),
      tracker_(ctx.harness),
      reach_(ctx.scene, ctx.harness),
      state_(FingertipState::free_at(ctx.scene.rest_center)),
      log_mark_(ctx.device.log().size()) {
    record_.participant_id = participant_id;
    record_.entry = entry;
    record_.attempt = attempt;
}

double TrialRunner::time() const { return static_cast<double>(tick_) * ctx_.harness.dt(); }

TrialStep TrialRunner::step(SubjectModel& subject) { return advance(reach_.position(time(), strength_, subject)); }

TrialStep TrialRunner::step(const Vec3& real_pos) { return advance(real_pos); }

TrialStep TrialRunner::advance(const Vec3& real_pos) {
    const HarnessConfig& cfg = ctx_.harness;
    TrialStep out;
    out.t = time();
    if (finished_) {
        out.fingertip = state_;
        out.phase = tracker_.phase();
        out.finished = true;
        return out;
    }
    const double hard_stop = cfg.contact_timeout + cfg.window_duration * 4.0 + cfg.return_time + kLiftTime + 1.0;
    const bool had_contact = tracker_.events().contact_start.has_value();

    state_ = resolve_proxy(state_, real_pos, ctx_.scene.objects);
    out.fingertip = state_;
    out.sample = interpenetration(state_, out.t);
    out.frame = ctx_.renderer.render(record_.entry.condition, out.sample.d_hat);
    strength_ = feedback_strength(record_.entry.condition, out.sample.d_hat);
    ++tick_;

    if (out.frame.device_fault) {
        record_.invalid_reason = "device fault: " + *out.frame.device_fault;
        finished_ = true;
    } else {
        out.phase = tracker_.update(out.sample, state_.in_contact);
        ctx_.device.advance(cfg.dt());
        if (out.phase == TrialPhase::Invalid) finished_ = true;
        if (out.phase == TrialPhase::WindowDone && !release_time_) {
            release_time_ = out.t;
            reach_.release(out.t);
            out.window_closed = true;
        }
        if (release_time_ && reach_.returned(out.t)) finished_ = true;
        if (!finished_ && out.t > hard_stop) {
            record_.invalid_reason = "trial did not finish";
            finished_ = true;
        }
    }
    out.phase = tracker_.phase();
    out.contact_started = !had_contact && tracker_.events().contact_start.has_value();
    out.finished = finished_;
    return out;
}

TrialRecord TrialRunner::finish() {
    finished_ = true;
    ctx_.renderer.stop();
    TrialRecord record = record_;
    record.valid = tracker_.phase() == TrialPhase::WindowDone && record.invalid_reason.empty();
    if (record.invalid_reason.empty() && !record.valid)
        record.invalid_reason = tracker_.phase() == TrialPhase::Invalid ? tracker_.invalid_reason() : "aborted";
    record.metrics = tracker_.running_metrics().metrics();
    record.events = tracker_.events();
    if (ctx_.harness.record_samples) record.samples = tracker_.samples();
    record.stimulus_commands = ctx_.device.count_stimulating_commands(log_mark_);
    return record;
}

TrialRecord run_trial(int participant_id, const PlanEntry& entry, int attempt, SubjectModel& subject,
                      const TrialContext& ctx) {
    TrialRunner runner(participant_id, entry, attempt, ctx);
    while (!runner.finished()) runner.step(subject);
    return runner.finish();
}

}  // namespace etfb
