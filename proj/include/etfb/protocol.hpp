#pragma once

// Binary device command protocol.
//
//   frame    = 0xA5 | length | command | payload[length] | checksum
//   checksum = XOR of every preceding byte of the frame
//
//   0x01 SetChannelMode  payload: channel u8, mode u8 (0 disabled, 1 cathode, 2 anode)
//   0x02 SetStimulus     payload: intensity u8 (0.1 mA units), pulse width u16 BE (µs), frequency u8 (Hz)
//   0x03 Start           no payload
//   0x04 Stop            no payload

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "etfb/stimulator.hpp"

namespace etfb::protocol {

inline constexpr std::uint8_t kMagic = 0xA5;

enum class Opcode : std::uint8_t { SetChannelMode = 0x01, SetStimulus = 0x02, Start = 0x03, Stop = 0x04 };

struct SetChannelMode {
    ChannelConfig channel;
    friend bool operator==(const SetChannelMode&, const SetChannelMode&) = default;
};

/// Wire-level stimulus: integral units exactly as transmitted.
struct SetStimulus {
    std::uint8_t intensity_decima = 0;  ///< 0.1 mA units
    std::uint16_t pulse_width_us = 0;
    std::uint8_t frequency_hz = 0;

    double intensity_ma() const { return intensity_decima / 10.0; }
    StimulusParams params() const { return {intensity_ma(), double(pulse_width_us), double(frequency_hz), true}; }
    friend bool operator==(const SetStimulus&, const SetStimulus&) = default;
};

struct Start {
    friend bool operator==(const Start&, const Start&) = default;
};
struct Stop {
    friend bool operator==(const Stop&, const Stop&) = default;
};

using Command = std::variant<SetChannelMode, SetStimulus, Start, Stop>;

class EncodingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class FrameErrorKind { Truncated, BadMagic, BadLength, BadChecksum, UnknownCommand, BadPayload };

const char* to_string(FrameErrorKind kind);

class FrameError : public std::runtime_error {
public:
    FrameError(FrameErrorKind kind, const std::string& detail)
        : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}
    FrameErrorKind kind() const { return kind_; }

private:
    FrameErrorKind kind_;
};

/// Wire form of physical parameters. Throws EncodingError unless the values
/// are valid and lie on the wire grid (see quantize_for_device).
SetStimulus make_set_stimulus(const StimulusParams& p);

std::vector<std::uint8_t> encode_command(const Command& cmd);

struct DecodeResult {
    std::optional<Command> command;  ///< empty when rejected
    FrameErrorKind error = FrameErrorKind::Truncated;
    std::string detail;
};

/// Decode exactly one frame without throwing.
DecodeResult try_decode_command(std::span<const std::uint8_t> frame);

/// Decode exactly one frame. Throws FrameError naming the rejection reason.
Command decode_command(std::span<const std::uint8_t> frame);

std::uint8_t xor_checksum(std::span<const std::uint8_t> bytes);

/// "A5 00 04 A1" style dump.
std::string hex_dump(std::span<const std::uint8_t> bytes);

std::string describe(const Command& cmd);

}  // namespace etfb::protocol
