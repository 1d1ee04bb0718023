#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "etfb/protocol.hpp"

namespace etfb {

struct DeviceState {
    std::array<ChannelConfig, device_limits::kChannelCount> channels{};
    StimulusParams current_params;
    bool running = false;

    DeviceState() {
        for (std::size_t i = 0; i < channels.size(); ++i) channels[i].channel_id = static_cast<std::uint8_t>(i);
    }
};

struct DeviceLogEntry {
    double t = 0.0;  ///< device clock, s
    std::string hex;
    std::optional<protocol::Opcode> opcode;  ///< empty when the frame did not decode
    std::string description;
    bool accepted = true;
    std::string error;
};

struct DeviceReply {
    bool accepted = true;
    std::string error;
};

/// Device simulation context. Frames are queued with submit() and applied in
/// arrival order by process(); the clock advances with advance().
class DeviceSimulator {
public:
    void submit(std::vector<std::uint8_t> frame);
    /// Apply every queued frame; replies in submission order.
    std::vector<DeviceReply> process();
    /// Encode, submit and process a single command.
    DeviceReply execute(const protocol::Command& cmd);

    void advance(double dt);

    const DeviceState& state() const { return state_; }
    double clock() const { return clock_; }
    /// Seconds spent running with an active stimulus.
    double stimulation_time() const { return stimulation_time_; }
    const std::vector<DeviceLogEntry>& log() const { return log_; }
    std::size_t count_stimulating_commands(std::size_t from_log_index = 0) const;

private:
    DeviceReply apply(const std::vector<std::uint8_t>& frame);

    DeviceState state_;
    std::deque<std::vector<std::uint8_t>> pending_;
    std::vector<DeviceLogEntry> log_;
    double clock_ = 0.0;
    double stimulation_time_ = 0.0;
};

/// Audit log, one line per frame: t_s,hex,opcode,accepted,description,error.
void write_device_log_csv(std::ostream& out, const std::vector<DeviceLogEntry>& log);

}  // namespace etfb
