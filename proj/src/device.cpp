#include "etfb/device.hpp"

#include <ostream>

#include <fmt/format.h>

#include "etfb/detail/overloaded.hpp"

namespace etfb {

using detail::Overloaded;

void DeviceSimulator::submit(std::vector<std::uint8_t> frame) { pending_.push_back(std::move(frame)); }

std::vector<DeviceReply> DeviceSimulator::process() {
    std::vector<DeviceReply> replies;
    while (!pending_.empty()) {
        replies.push_back(apply(pending_.front()));
        pending_.pop_front();
    }
    return replies;
}

DeviceReply DeviceSimulator::execute(const protocol::Command& cmd) {
    submit(protocol::encode_command(cmd));
    return process().back();
}

void DeviceSimulator::advance(double dt) {
    clock_ += dt;
    if (state_.running && state_.current_params.active) stimulation_time_ += dt;
}

DeviceReply DeviceSimulator::apply(const std::vector<std::uint8_t>& frame) {
    DeviceLogEntry entry{clock_, protocol::hex_dump(frame), std::nullopt, {}, true, {}};
    DeviceReply reply;
    try {
        const auto cmd = protocol::decode_command(frame);
        entry.description = protocol::describe(cmd);
        entry.opcode = static_cast<protocol::Opcode>(frame[2]);
        std::visit(Overloaded{
                       [&](const protocol::SetChannelMode& c) { state_.channels[c.channel.channel_id] = c.channel; },
                       [&](const protocol::SetStimulus& s) { state_.current_params = s.params(); },
                       [&](const protocol::Start&) {
                           if (!state_.current_params.active) {
                               reply = {false, "Start before SetStimulus"};
                               return;
                           }
                           state_.running = true;
                       },
                       [&](const protocol::Stop&) { state_.running = false; },
                   },
                   cmd);
    } catch (const protocol::FrameError& e) {
        reply = {false, e.what()};
    }
    entry.accepted = reply.accepted;
    entry.error = reply.error;
    log_.push_back(std::move(entry));
    return reply;
}

std::size_t DeviceSimulator::count_stimulating_commands(std::size_t from_log_index) const {
    std::size_t n = 0;
    for (std::size_t i = from_log_index; i < log_.size(); ++i) {
        const auto& op = log_[i].opcode;
        if (op == protocol::Opcode::SetStimulus || op == protocol::Opcode::Start) ++n;
    }
    return n;
}

void write_device_log_csv(std::ostream& out, const std::vector<DeviceLogEntry>& log) {
    auto clean = [](std::string s) {
        for (char& c : s)
            if (c == ',' || c == '\n') c = ';';
        return s;
    };
    out << "t_s,hex,opcode,accepted,description,error\n";
    for (const auto& e : log) {
        out << fmt::format("{},{},{},{},{},{}\n", e.t, e.hex,
                           e.opcode ? fmt::format("{:02X}", static_cast<int>(*e.opcode)) : std::string(),
                           e.accepted ? 1 : 0, clean(e.description), clean(e.error));
    }
}

}  // namespace etfb
