#pragma once

#include <optional>
#include <string>

#include "etfb/device.hpp"
#include "etfb/experiment.hpp"
#include "etfb/modulation.hpp"

namespace etfb {

/// SetStimulus is re-sent only when a quantized parameter moves by at least its deadband.
struct StimulusDeadband {
    double intensity = 0.1;    ///< mA
    double pulse_width = 1.0;  ///< µs
    double frequency = 0.5;    ///< Hz

    bool exceeded(const StimulusParams& a, const StimulusParams& b) const;
};

struct FeedbackFrame {
    StimulusParams stimulus;              ///< what the device is now emitting (off when idle)
    std::optional<OutlineParams> outline;  ///< set under visual conditions only
    int commands_sent = 0;
    std::optional<std::string> device_fault;
};

/// Turns normalized interpenetration into device commands and outline
/// parameters for the active condition. Deadbands are evaluated against the
/// parameters the device currently holds.
class FeedbackRenderer {
public:
    FeedbackRenderer(ModulationConfig cfg, DeviceSimulator& device, StimulusDeadband deadband = {});

    FeedbackFrame render(const Condition& condition, double d_hat);
    /// Stop stimulation if running.
    FeedbackFrame stop();

    void set_working_intensity(double ma) { cfg_.intensity_fixed = ma; }
    const ModulationConfig& config() const { return cfg_; }

private:
    void send(const protocol::Command& cmd, FeedbackFrame& frame);

    ModulationConfig cfg_;
    DeviceSimulator& device_;
    StimulusDeadband deadband_;
};

}  // namespace etfb
