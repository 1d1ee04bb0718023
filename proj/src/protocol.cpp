#include "etfb/protocol.hpp"

#include <cmath>

#include <fmt/format.h>

#include "etfb/detail/overloaded.hpp"

namespace etfb::protocol {
namespace {

using detail::Overloaded;

constexpr double kGridTolerance = 1e-6;

std::size_t payload_length(Opcode op) {
    switch (op) {
        case Opcode::SetChannelMode: return 2;
        case Opcode::SetStimulus: return 4;
        case Opcode::Start:
        case Opcode::Stop: return 0;
    }
    return 0;
}

long on_grid(double value, double unit, const char* field) {
    const double scaled = value / unit;
    const double rounded = std::round(scaled);
    if (!std::isfinite(scaled) || std::abs(scaled - rounded) > kGridTolerance)
        throw EncodingError(fmt::format("{}={} is not representable on the wire grid", field, value));
    return static_cast<long>(rounded);
}

}  // namespace

const char* to_string(FrameErrorKind kind) {
    switch (kind) {
        case FrameErrorKind::Truncated: return "truncated frame";
        case FrameErrorKind::BadMagic: return "bad magic";
        case FrameErrorKind::BadLength: return "bad length";
        case FrameErrorKind::BadChecksum: return "bad checksum";
        case FrameErrorKind::UnknownCommand: return "unknown command";
        case FrameErrorKind::BadPayload: return "bad payload";
    }
    return "frame error";
}

std::uint8_t xor_checksum(std::span<const std::uint8_t> bytes) {
    std::uint8_t c = 0;
    for (auto b : bytes) c ^= b;
    return c;
}

SetStimulus make_set_stimulus(const StimulusParams& p) {
    if (!p.active) throw EncodingError("SetStimulus requires active parameters");
    if (auto v = validate_params(p); !v.empty()) throw EncodingError("SetStimulus: " + describe(v));
    SetStimulus s;
    s.intensity_decima = static_cast<std::uint8_t>(on_grid(p.intensity, device_limits::kIntensityStep, "intensity"));
    s.pulse_width_us = static_cast<std::uint16_t>(on_grid(p.pulse_width, 1.0, "pulse_width"));
    s.frequency_hz = static_cast<std::uint8_t>(on_grid(p.frequency, 1.0, "frequency"));
    return s;
}

std::vector<std::uint8_t> encode_command(const Command& cmd) {
    std::vector<std::uint8_t> payload;
    Opcode op{};
    std::visit(Overloaded{
                   [&](const SetChannelMode& c) {
                       if (c.channel.channel_id >= device_limits::kChannelCount)
                           throw EncodingError(fmt::format("channel {} out of range", c.channel.channel_id));
                       if (static_cast<std::uint8_t>(c.channel.mode) > 2) throw EncodingError("unknown channel mode");
                       op = Opcode::SetChannelMode;
                       payload = {c.channel.channel_id, static_cast<std::uint8_t>(c.channel.mode)};
                   },
                   [&](const SetStimulus& s) {
                       // Re-validate: wire structs can be built by hand.
                       make_set_stimulus(s.params());
                       op = Opcode::SetStimulus;
                       payload = {s.intensity_decima, static_cast<std::uint8_t>(s.pulse_width_us >> 8),
                                  static_cast<std::uint8_t>(s.pulse_width_us & 0xFF), s.frequency_hz};
                   },
                   [&](const Start&) { op = Opcode::Start; },
                   [&](const Stop&) { op = Opcode::Stop; },
               },
               cmd);

    std::vector<std::uint8_t> frame;
    frame.reserve(payload.size() + 4);
    frame.push_back(kMagic);
    frame.push_back(static_cast<std::uint8_t>(payload.size()));
    frame.push_back(static_cast<std::uint8_t>(op));
    frame.insert(frame.end(), payload.begin(), payload.end());
    frame.push_back(xor_checksum(frame));
    return frame;
}

DecodeResult try_decode_command(std::span<const std::uint8_t> frame) {
    auto fail = [](FrameErrorKind kind, std::string detail) { return DecodeResult{std::nullopt, kind, std::move(detail)}; };
    auto ok = [](Command cmd) { return DecodeResult{std::move(cmd), {}, {}}; };
    if (frame.size() < 4) return fail(FrameErrorKind::Truncated, fmt::format("{} bytes", frame.size()));
    if (frame[0] != kMagic) return fail(FrameErrorKind::BadMagic, fmt::format("0x{:02X}", frame[0]));
    const std::size_t declared = frame[1];
    if (frame.size() < declared + 4)
        return fail(FrameErrorKind::Truncated,
                    fmt::format("declared {} payload bytes, have {}", declared, frame.size() - 4));
    if (frame.size() > declared + 4)
        return fail(FrameErrorKind::BadLength, fmt::format("{} trailing bytes", frame.size() - declared - 4));
    const auto body = frame.first(frame.size() - 1);
    if (xor_checksum(body) != frame.back())
        return fail(FrameErrorKind::BadChecksum,
                    fmt::format("expected 0x{:02X}, got 0x{:02X}", xor_checksum(body), frame.back()));

    const std::uint8_t opcode = frame[2];
    if (opcode < 0x01 || opcode > 0x04) return fail(FrameErrorKind::UnknownCommand, fmt::format("0x{:02X}", opcode));
    const auto op = static_cast<Opcode>(opcode);
    if (declared != payload_length(op))
        return fail(FrameErrorKind::BadLength, fmt::format("opcode 0x{:02X} expects {} payload bytes, got {}", opcode,
                                                           payload_length(op), declared));
    const auto payload = frame.subspan(3, declared);

    switch (op) {
        case Opcode::SetChannelMode: {
            if (payload[0] >= device_limits::kChannelCount)
                return fail(FrameErrorKind::BadPayload, fmt::format("channel {}", payload[0]));
            if (payload[1] > 2) return fail(FrameErrorKind::BadPayload, fmt::format("mode {}", payload[1]));
            return ok(SetChannelMode{{payload[0], static_cast<ChannelMode>(payload[1])}});
        }
        case Opcode::SetStimulus: {
            SetStimulus s{payload[0], static_cast<std::uint16_t>((payload[1] << 8) | payload[2]), payload[3]};
            if (auto v = validate_params(s.params()); !v.empty()) return fail(FrameErrorKind::BadPayload, describe(v));
            return ok(s);
        }
        case Opcode::Start: return ok(Start{});
        case Opcode::Stop: return ok(Stop{});
    }
    return fail(FrameErrorKind::UnknownCommand, "unreachable");
}

Command decode_command(std::span<const std::uint8_t> frame) {
    auto r = try_decode_command(frame);
    if (!r.command) throw FrameError(r.error, r.detail);
    return std::move(*r.command);
}

std::string hex_dump(std::span<const std::uint8_t> bytes) {
    std::string s;
    for (auto b : bytes) {
        if (!s.empty()) s += ' ';
        s += fmt::format("{:02X}", b);
    }
    return s;
}

std::string describe(const Command& cmd) {
    return std::visit(Overloaded{
                          [](const SetChannelMode& c) {
                              return fmt::format("SetChannelMode(ch={}, mode={})", c.channel.channel_id,
                                                 static_cast<int>(c.channel.mode));
                          },
                          [](const SetStimulus& s) {
                              return fmt::format("SetStimulus({:.1f} mA, {} us, {} Hz)", s.intensity_ma(),
                                                 s.pulse_width_us, s.frequency_hz);
                          },
                          [](const Start&) { return std::string("Start"); },
                          [](const Stop&) { return std::string("Stop"); },
                      },
                      cmd);
}

}  // namespace etfb::protocol
