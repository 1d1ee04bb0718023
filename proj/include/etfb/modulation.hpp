#pragma once

#include <nlohmann/json_fwd.hpp>

namespace etfb {

enum class FrequencyLaw {
    /// f = f_min * (f_max / f_min)^d_hat, linear in log-frequency.
    Exponential,
    /// f = f_min + (f_max - f_min) * d_hat^gamma.
    Power,
};

struct ModulationConfig {
    double pw_min = 200.0;  ///< µs
    double pw_max = 500.0;  ///< µs
    double f_min = 30.0;    ///< Hz
    double f_max = 200.0;   ///< Hz
    double intensity_fixed = 1.0;  ///< mA, replaced by the calibrated working intensity
    double outline_scale_min = 1.0;
    double outline_scale_max = 1.2;
    double outline_border_min = 1.0;  ///< px
    double outline_border_max = 5.0;  ///< px
    FrequencyLaw frequency_law = FrequencyLaw::Exponential;
    double gamma = 2.2;  ///< used by FrequencyLaw::Power only

    /// Throws ConfigError when a range is empty or outside the device limits.
    void validate() const;
};

struct StimulusParams {
    double intensity = 0.0;    ///< mA
    double pulse_width = 0.0;  ///< µs
    double frequency = 0.0;    ///< Hz
    bool active = false;

    static constexpr StimulusParams off() { return {}; }
    friend bool operator==(const StimulusParams&, const StimulusParams&) = default;
};

struct OutlineParams {
    double scale = 1.0;
    double border = 1.0;  ///< px, real-valued
    friend bool operator==(const OutlineParams&, const OutlineParams&) = default;
};

/// Depth-proportional electrotactile parameters. d_hat == 0 means no stimulation.
StimulusParams electro_map(double d_hat, const ModulationConfig& cfg);

/// Depth-proportional outline parameters.
OutlineParams visual_map(double d_hat, const ModulationConfig& cfg);

ModulationConfig modulation_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ModulationConfig& cfg);

}  // namespace etfb
