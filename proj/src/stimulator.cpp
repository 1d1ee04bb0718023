#include "etfb/stimulator.hpp"

#include <cmath>
#include <ostream>
#include <set>

#include <fmt/format.h>

#include "etfb/errors.hpp"

namespace etfb {

void ElectrodeLayout::validate() const {
    std::set<int> seen;
    auto check = [&](std::uint8_t id) {
        if (id >= device_limits::kChannelCount) throw ConfigError(fmt::format("electrode layout: channel {} >= 32", id));
        if (!seen.insert(id).second) throw ConfigError(fmt::format("electrode layout: channel {} used twice", id));
    };
    for (const auto& row : cathodes)
        for (auto id : row) check(id);
    if (anodes.empty()) throw ConfigError("electrode layout: at least one anode required");
    for (auto id : anodes) check(id);
}

std::vector<ChannelConfig> ElectrodeLayout::channel_configs() const {
    std::vector<ChannelConfig> out;
    for (const auto& row : cathodes)
        for (auto id : row) out.push_back({id, ChannelMode::Cathode});
    for (auto id : anodes) out.push_back({id, ChannelMode::Anode});
    return out;
}

std::vector<ParamViolation> validate_params(const StimulusParams& p) {
    using namespace device_limits;
    std::vector<ParamViolation> out;
    auto check = [&](const char* field, double v, double lo, double hi) {
        if (!(v >= lo && v <= hi)) out.push_back({field, v, lo, hi});
    };
    check("intensity", p.intensity, kIntensityMin, kIntensityMax);
    check("pulse_width", p.pulse_width, kPulseWidthMin, kPulseWidthMax);
    check("frequency", p.frequency, kFrequencyMin, kFrequencyMax);
    return out;
}

std::string describe(const std::vector<ParamViolation>& violations) {
    std::string s;
    for (const auto& v : violations) {
        if (!s.empty()) s += "; ";
        s += fmt::format("{}={} not in [{}, {}]", v.field, v.value, v.min, v.max);
    }
    return s;
}

PulseTrain synthesize(const StimulusParams& p, double duration, double rate) {
    PulseTrain train;
    train.rate = rate;
    train.params = p;
    if (!p.active) return train;

    if (auto violations = validate_params(p); !violations.empty()) throw ParameterError(std::move(violations));
    if (!(duration >= 0.0) || !std::isfinite(duration)) throw SynthesisError("duration must be finite and >= 0");
    if (!(rate > 0.0) || !std::isfinite(rate)) throw SynthesisError("synthesis rate must be positive");

    const double phase_s = p.pulse_width * 1e-6;
    const auto phase_samples = static_cast<std::size_t>(std::llround(phase_s * rate));
    if (phase_samples < 2)
        throw SynthesisError(fmt::format("rate {} Hz gives {} samples per {} µs phase", rate, phase_samples,
                                         p.pulse_width));

    const auto total = static_cast<std::size_t>(std::llround(duration * rate));
    const auto pulses = static_cast<std::size_t>(std::floor(duration * p.frequency));

    train.samples_per_phase = phase_samples;
    train.pulse_count = pulses;
    train.samples.resize(total);
    for (std::size_t k = 0; k < total; ++k) train.samples[k].t = static_cast<double>(k) / rate;

    for (std::size_t n = 0; n < pulses; ++n) {
        const auto onset = static_cast<std::size_t>(std::llround(static_cast<double>(n) * rate / p.frequency));
        for (std::size_t k = 0; k < 2 * phase_samples && onset + k < total; ++k)
            train.samples[onset + k].amplitude = k < phase_samples ? -p.intensity : p.intensity;
    }
    return train;
}

void write_pulse_train_csv(std::ostream& out, const PulseTrain& train) {
    out << "t,amplitude\n";
    for (const auto& s : train.samples) out << fmt::format("{:.8f},{:.4f}\n", s.t, s.amplitude);
}

StimulusParams quantize_for_device(const StimulusParams& p) {
    if (!p.active) return StimulusParams::off();
    StimulusParams q = p;
    const double steps = std::floor(p.intensity / device_limits::kIntensityStep + 1e-9);
    q.intensity = std::round(steps) / 10.0;
    q.pulse_width = std::round(p.pulse_width);
    q.frequency = std::round(p.frequency);
    return q;
}

}  // namespace etfb
