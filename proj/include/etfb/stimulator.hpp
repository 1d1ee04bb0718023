#pragma once

// Simulated 32-channel electrotactile stimulator: channel roles, electrode
// layout, parameter validation and biphasic pulse-train synthesis.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "etfb/modulation.hpp"

namespace etfb {

namespace device_limits {
inline constexpr double kIntensityMin = 0.1;   // mA
inline constexpr double kIntensityMax = 9.0;   // mA
inline constexpr double kPulseWidthMin = 30.0;   // µs
inline constexpr double kPulseWidthMax = 500.0;  // µs
inline constexpr double kFrequencyMin = 1.0;     // Hz
inline constexpr double kFrequencyMax = 200.0;   // Hz
inline constexpr int kChannelCount = 32;
inline constexpr double kIntensityStep = 0.1;  // mA, wire granularity
}  // namespace device_limits

enum class ChannelMode : std::uint8_t { Disabled = 0, Cathode = 1, Anode = 2 };

struct ChannelConfig {
    std::uint8_t channel_id = 0;
    ChannelMode mode = ChannelMode::Disabled;
    friend bool operator==(const ChannelConfig&, const ChannelConfig&) = default;
};

/// 2x3 cathode matrix (row-major) plus the interconnected lateral anodes.
struct ElectrodeLayout {
    std::array<std::array<std::uint8_t, 3>, 2> cathodes{{{0, 1, 2}, {3, 4, 5}}};
    std::vector<std::uint8_t> anodes{6, 7};

    /// Throws ConfigError on duplicate or out-of-range ids, or no anodes.
    void validate() const;
    /// Channel modes realizing this layout; every other channel stays disabled.
    std::vector<ChannelConfig> channel_configs() const;
};

struct ParamViolation {
    std::string field;
    double value = 0.0;
    double min = 0.0;
    double max = 0.0;
};

/// Every hardware range violation; empty means the triple is accepted.
std::vector<ParamViolation> validate_params(const StimulusParams& p);

std::string describe(const std::vector<ParamViolation>& violations);

class ParameterError : public std::runtime_error {
public:
    explicit ParameterError(std::vector<ParamViolation> v)
        : std::runtime_error("invalid stimulus parameters: " + describe(v)), violations_(std::move(v)) {}
    const std::vector<ParamViolation>& violations() const { return violations_; }

private:
    std::vector<ParamViolation> violations_;
};

class SynthesisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kDefaultSynthesisRate = 100'000.0;  // Hz

struct PulseSample {
    double t = 0.0;          ///< s
    double amplitude = 0.0;  ///< mA
};

struct PulseTrain {
    double rate = kDefaultSynthesisRate;
    StimulusParams params;
    std::size_t pulse_count = 0;
    std::size_t samples_per_phase = 0;
    std::vector<PulseSample> samples;

    double dt() const { return 1.0 / rate; }
};

/// Symmetric biphasic square pulses, cathodic phase first, no inter-phase gap.
/// Throws ParameterError for out-of-range parameters and SynthesisError when
/// the rate gives fewer than two samples per phase.
PulseTrain synthesize(const StimulusParams& p, double duration, double rate = kDefaultSynthesisRate);

/// "t,amplitude" CSV with a header row.
void write_pulse_train_csv(std::ostream& out, const PulseTrain& train);

/// Snap to the wire grid: intensity floored to 0.1 mA, pulse width and frequency rounded to integers.
StimulusParams quantize_for_device(const StimulusParams& p);

}  // namespace etfb
