#pragma once

// One task repetition: reach from the resting area, touch the top of the
// cube, hold contact for the window, return.

#include <optional>
#include <string>
#include <vector>

#include "etfb/contact.hpp"
#include "etfb/experiment.hpp"
#include "etfb/feedback.hpp"
#include "etfb/metrics.hpp"
#include "etfb/subject.hpp"

namespace etfb {

enum class TrialPhase { WaitingContact, InWindow, WindowDone, Invalid };

const char* to_string(TrialPhase phase);

struct TrialEvents {
    double start_beep = 0.0;
    std::optional<double> contact_start;
    std::optional<double> end_beep;
};

struct TrialRecord {
    int participant_id = 0;
    PlanEntry entry;
    int attempt = 1;
    bool valid = false;
    std::string invalid_reason;
    std::vector<InterpenetrationSample> samples;  ///< window samples only
    TrialMetrics metrics;
    TrialEvents events;
    std::size_t stimulus_commands = 0;  ///< SetStimulus/Start frames issued during the trial
};

/// Contact window bookkeeping. The window opens at first contact, pauses
/// while contact is lost (up to the grace period) and closes after
/// window_ticks in-contact samples.
class TrialTracker {
public:
    explicit TrialTracker(const HarnessConfig& cfg);

    TrialPhase update(const InterpenetrationSample& sample, bool in_contact);

    TrialPhase phase() const { return phase_; }
    const TrialEvents& events() const { return events_; }
    const std::vector<InterpenetrationSample>& samples() const { return samples_; }
    const RunningMetrics& running_metrics() const { return metrics_; }
    const std::string& invalid_reason() const { return invalid_reason_; }
    /// Seconds of window accumulated so far.
    double window_elapsed() const;
    bool in_grace() const { return lost_since_.has_value(); }

private:
    HarnessConfig cfg_;
    TrialPhase phase_ = TrialPhase::WaitingContact;
    TrialEvents events_;
    std::vector<InterpenetrationSample> samples_;
    RunningMetrics metrics_;
    std::optional<double> lost_since_;
    std::string invalid_reason_;
    int window_samples_ = 0;
};

/// Scripted reach driven by the synthetic subject: minimum-jerk transport to
/// a hover point, minimum-jerk descent to the surface, then per-tick depth
/// from SubjectModel::steer, and a minimum-jerk return once released.
class SyntheticReach {
public:
    SyntheticReach(const SceneSpec& scene, const HarnessConfig& cfg);

    Vec3 position(double t, double feedback_strength, SubjectModel& subject);
    void release(double t);
    bool returned(double t) const;

private:
    HarnessConfig cfg_;
    Vec3 rest_;
    Vec3 contact_;
    Vec3 hover_;
    Vec3 last_;
    std::optional<double> release_time_;
    Vec3 release_pos_;
};

struct TrialContext {
    const SceneSpec& scene;
    const HarnessConfig& harness;
    FeedbackRenderer& renderer;
    DeviceSimulator& device;
};

/// Feedback strength the subject perceives: d_hat under any feedback condition, 0 under None.
double feedback_strength(const Condition& condition, double d_hat);

struct TrialStep {
    double t = 0.0;
    FingertipState fingertip;
    InterpenetrationSample sample;
    FeedbackFrame frame;
    TrialPhase phase = TrialPhase::WaitingContact;
    bool contact_started = false;
    bool window_closed = false;
    bool finished = false;
};

/// Fixed-step trial loop, one call per tick. The fingertip comes either from
/// the synthetic reach or from an external position source.
class TrialRunner {
public:
    TrialRunner(int participant_id, const PlanEntry& entry, int attempt, const TrialContext& ctx);

    TrialStep step(SubjectModel& subject);
    TrialStep step(const Vec3& real_pos);

    bool finished() const { return finished_; }
    double time() const;
    const PlanEntry& entry() const { return record_.entry; }
    int attempt() const { return record_.attempt; }
    const TrialTracker& tracker() const { return tracker_; }
    const FingertipState& fingertip() const { return state_; }

    /// Stops stimulation and returns the record; usable once or at abort.
    TrialRecord finish();

private:
    TrialStep advance(const Vec3& real_pos);

    const TrialContext& ctx_;
    TrialRecord record_;
    TrialTracker tracker_;
    SyntheticReach reach_;
    FingertipState state_;
    std::size_t log_mark_;
    long tick_ = 0;
    double strength_ = 0.0;
    std::optional<double> release_time_;
    bool finished_ = false;
};

TrialRecord run_trial(int participant_id, const PlanEntry& entry, int attempt, SubjectModel& subject,
                      const TrialContext& ctx);

}  // namespace etfb
