#include "etfb/feedback.hpp"

#include <cmath>

namespace etfb {

bool StimulusDeadband::exceeded(const StimulusParams& a, const StimulusParams& b) const {
    constexpr double kEps = 1e-9;
    return std::abs(a.intensity - b.intensity) >= intensity - kEps ||
           std::abs(a.pulse_width - b.pulse_width) >= pulse_width - kEps ||
           std::abs(a.frequency - b.frequency) >= frequency - kEps;
}

FeedbackRenderer::FeedbackRenderer(ModulationConfig cfg, DeviceSimulator& device, StimulusDeadband deadband)
    : cfg_(cfg), device_(device), deadband_(deadband) {}

void FeedbackRenderer::send(const protocol::Command& cmd, FeedbackFrame& frame) {
    const auto reply = device_.execute(cmd);
    ++frame.commands_sent;
    if (!reply.accepted && !frame.device_fault) frame.device_fault = reply.error;
}

FeedbackFrame FeedbackRenderer::render(const Condition& condition, double d_hat) {
    FeedbackFrame frame;
    if (condition.visual()) frame.outline = visual_map(d_hat, cfg_);

    const StimulusParams wanted =
        condition.electrotactile() ? quantize_for_device(electro_map(d_hat, cfg_)) : StimulusParams::off();
    if (!wanted.active) {
        if (device_.state().running) send(protocol::Stop{}, frame);
        return frame;
    }

    // Compare against what the device holds; calibration probes also reprogram it.
    const auto& current = device_.state().current_params;
    try {
        if (!current.active || deadband_.exceeded(current, wanted)) send(protocol::make_set_stimulus(wanted), frame);
        if (!device_.state().running) send(protocol::Start{}, frame);
    } catch (const protocol::EncodingError& e) {
        frame.device_fault = e.what();
        return frame;
    }
    if (device_.state().running) frame.stimulus = device_.state().current_params;
    return frame;
}

FeedbackFrame FeedbackRenderer::stop() {
    FeedbackFrame frame;
    if (device_.state().running) send(protocol::Stop{}, frame);
    return frame;
}

}  // namespace etfb
