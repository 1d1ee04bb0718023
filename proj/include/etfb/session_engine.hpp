#pragma once

// Live session state machine. One call to tick() advances the session by one
// harness tick: queued inputs are applied in arrival order, then the current
// stage (calibration probe or trial) steps once, then a snapshot is emitted.
//
// In synthetic mode the subject model answers calibration probes and steers
// the fingertip. In operator mode probes wait for calibration_response
// messages and the fingertip follows the newest finger_input.

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "etfb/config.hpp"
#include "etfb/device.hpp"
#include "etfb/feedback.hpp"
#include "etfb/session_protocol.hpp"
#include "etfb/session_runner.hpp"
#include "etfb/trial.hpp"

namespace etfb::session {

struct EngineOptions {
    SessionConfig config;
    int participant_id = 0;
    Mode mode = Mode::Synthetic;
    std::string session_id;  ///< defaults to "p<participant>-s<seed>"
    bool autostart = false;   ///< start without a control message
    StimulusDeadband deadband;
};

/// Outbound message; reply_to names the input source a reply is meant for.
struct Outbound {
    SessionMessage message;
    std::optional<std::uint64_t> reply_to;
};

class SessionEngine {
public:
    explicit SessionEngine(EngineOptions options);
    ~SessionEngine();

    SessionEngine(const SessionEngine&) = delete;
    SessionEngine& operator=(const SessionEngine&) = delete;

    /// Queue an input from `source`; it is applied at the next tick.
    void submit(SessionMessage msg, std::uint64_t source = 0);

    /// Advance one tick (harness dt) and return the outbound messages in order.
    std::vector<Outbound> tick();

    /// Stamp a message with the next sequence number (for transport-level replies).
    SessionMessage stamp(Body body);

    double dt() const { return options_.config.harness.dt(); }
    double time() const { return clock_; }
    const std::string& session_id() const { return options_.session_id; }
    Mode mode() const { return options_.mode; }
    const std::string& phase() const { return phase_; }
    bool finished() const { return phase_ == "complete" || phase_ == "aborted"; }
    bool paused() const { return paused_; }
    const SessionDataset& dataset() const { return dataset_; }
    const DeviceSimulator& device() const { return device_; }
    const std::optional<Snapshot>& last_snapshot() const { return last_snapshot_; }

private:
    struct CalibrationStage;
    struct TrialStage;

    void apply(const SessionMessage& msg, std::uint64_t source);
    void reply(Body body, std::uint64_t source);
    void emit(Body body);
    void error(std::string code, std::string message, std::optional<std::uint64_t> ref, std::uint64_t source);

    void start();
    void abort(const std::string& reason);
    void step();
    void begin_calibration(int index);
    void step_calibration();
    void end_calibration();
    void begin_block();
    void begin_next_trial();
    void step_trial();
    void end_trial();
    Snapshot snapshot() const;

    EngineOptions options_;
    DeviceSimulator device_;
    FeedbackRenderer renderer_;
    std::unique_ptr<SubjectModel> subject_;
    TrialContext ctx_;

    SessionDataset dataset_;
    std::string phase_ = "idle";
    bool paused_ = false;
    double clock_ = 0.0;
    std::uint64_t next_seq_ = 1;
    std::deque<std::pair<SessionMessage, std::uint64_t>> inbox_;
    std::map<std::uint64_t, std::uint64_t> last_input_seq_;
    std::optional<Vec3> finger_;
    std::vector<Outbound> out_;
    std::optional<Snapshot> last_snapshot_;

    double exposure_mark_ = 0.0;
    double working_intensity_ = 0.0;
    int part_ = 1;
    int block_ = 1;
    std::unique_ptr<CalibrationStage> calibration_;
    std::unique_ptr<TrialStage> trial_;
    std::deque<std::pair<PlanEntry, int>> queue_;  ///< remaining (entry, attempt) in the block
    std::optional<TrialStep> last_step_;
};

}  // namespace etfb::session
