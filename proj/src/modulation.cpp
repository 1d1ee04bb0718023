#include "etfb/modulation.hpp"

#include <cmath>
#include <string>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "etfb/errors.hpp"
#include "etfb/stimulator.hpp"

namespace etfb {
namespace {

void require_d_hat(double d_hat) {
    if (!(d_hat >= 0.0 && d_hat <= 1.0))
        throw ContractViolation(fmt::format("normalized interpenetration {} outside [0,1]", d_hat));
}

void require_range(const char* name, double lo, double hi, double dev_lo, double dev_hi) {
    if (!(lo < hi)) throw ConfigError(fmt::format("modulation: {} range [{}, {}] is empty", name, lo, hi));
    if (lo < dev_lo || hi > dev_hi)
        throw ConfigError(fmt::format("modulation: {} range [{}, {}] outside device range [{}, {}]", name, lo, hi,
                                      dev_lo, dev_hi));
}

}  // namespace

void ModulationConfig::validate() const {
    require_range("pulse width", pw_min, pw_max, device_limits::kPulseWidthMin, device_limits::kPulseWidthMax);
    require_range("frequency", f_min, f_max, device_limits::kFrequencyMin, device_limits::kFrequencyMax);
    if (!(intensity_fixed >= device_limits::kIntensityMin && intensity_fixed <= device_limits::kIntensityMax))
        throw ConfigError(fmt::format("modulation: intensity {} mA outside [{}, {}]", intensity_fixed,
                                      device_limits::kIntensityMin, device_limits::kIntensityMax));
    if (!(outline_scale_min < outline_scale_max)) throw ConfigError("modulation: outline scale range is empty");
    if (!(outline_border_min < outline_border_max)) throw ConfigError("modulation: outline border range is empty");
    if (frequency_law == FrequencyLaw::Power && !(gamma > 0.0)) throw ConfigError("modulation: gamma must be positive");
}

StimulusParams electro_map(double d_hat, const ModulationConfig& cfg) {
    require_d_hat(d_hat);
    if (d_hat == 0.0) return StimulusParams::off();

    StimulusParams p;
    p.active = true;
    p.intensity = cfg.intensity_fixed;
    p.pulse_width = std::lerp(cfg.pw_min, cfg.pw_max, d_hat);
    switch (cfg.frequency_law) {
        case FrequencyLaw::Exponential:
            p.frequency = d_hat == 1.0 ? cfg.f_max : cfg.f_min * std::pow(cfg.f_max / cfg.f_min, d_hat);
            break;
        case FrequencyLaw::Power:
            p.frequency = std::lerp(cfg.f_min, cfg.f_max, std::pow(d_hat, cfg.gamma));
            break;
    }
    return p;
}

OutlineParams visual_map(double d_hat, const ModulationConfig& cfg) {
    require_d_hat(d_hat);
    return {std::lerp(cfg.outline_scale_min, cfg.outline_scale_max, d_hat),
            std::lerp(cfg.outline_border_min, cfg.outline_border_max, d_hat)};
}

ModulationConfig modulation_config_from_json(const nlohmann::json& j) {
    ModulationConfig cfg;
    try {
        cfg.pw_min = j.value("pw_min", cfg.pw_min);
        cfg.pw_max = j.value("pw_max", cfg.pw_max);
        cfg.f_min = j.value("f_min", cfg.f_min);
        cfg.f_max = j.value("f_max", cfg.f_max);
        cfg.intensity_fixed = j.value("intensity_fixed", cfg.intensity_fixed);
        cfg.outline_scale_min = j.value("outline_scale_min", cfg.outline_scale_min);
        cfg.outline_scale_max = j.value("outline_scale_max", cfg.outline_scale_max);
        cfg.outline_border_min = j.value("outline_border_min", cfg.outline_border_min);
        cfg.outline_border_max = j.value("outline_border_max", cfg.outline_border_max);
        cfg.gamma = j.value("gamma", cfg.gamma);
        const auto law = j.value("frequency_law", std::string("exponential"));
        if (law == "exponential")
            cfg.frequency_law = FrequencyLaw::Exponential;
        else if (law == "power")
            cfg.frequency_law = FrequencyLaw::Power;
        else
            throw ConfigError("modulation: unknown frequency_law '" + law + "'");
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("modulation: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

nlohmann::json to_json(const ModulationConfig& cfg) {
    return {{"pw_min", cfg.pw_min},
            {"pw_max", cfg.pw_max},
            {"f_min", cfg.f_min},
            {"f_max", cfg.f_max},
            {"intensity_fixed", cfg.intensity_fixed},
            {"outline_scale_min", cfg.outline_scale_min},
            {"outline_scale_max", cfg.outline_scale_max},
            {"outline_border_min", cfg.outline_border_min},
            {"outline_border_max", cfg.outline_border_max},
            {"frequency_law", cfg.frequency_law == FrequencyLaw::Exponential ? "exponential" : "power"},
            {"gamma", cfg.gamma}};
}

}  // namespace etfb
