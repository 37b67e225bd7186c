#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace fxfit {

inline constexpr std::size_t kNumParams = 46;
inline constexpr std::size_t kNumModules = 6;
inline constexpr std::size_t kNumEqBands = 6;
inline constexpr std::size_t kNumCompBands = 3;

/// Chain order.
enum class Module : std::size_t {
    equalizer = 0,
    distortion,
    multiband_comp,
    makeup_gain,
    stereo_imager,
    limiter,
};

std::string_view module_name(Module m);

enum class ParamScale { linear, log };

struct ParamSpec {
    std::string_view group;
    std::string_view name;
    std::string_view unit;
    double min;
    double max;
    double neutral;
    ParamScale scale;
    Module module;

    std::string full_name() const;
};

/// The 46 parameters in flattening order.
const std::array<ParamSpec, kNumParams>& param_schema();

struct EqBand {
    double center_freq;  // Hz
    double gain;         // dB
    double q;
};

struct EqParams {
    std::array<EqBand, kNumEqBands> bands;  // low shelf, 4 peaking, high shelf
};

struct DistortionParams {
    double drive;  // dB
    double mix;    // [0, 1]
};

struct CompBand {
    double threshold;  // dB
    double ratio;
    double attack;   // ms
    double release;  // ms
    double makeup;   // dB
};

struct MultibandParams {
    double xover_low;   // Hz
    double xover_high;  // Hz
    std::array<CompBand, kNumCompBands> bands;  // low, mid, high
};

struct LimiterParams {
    double comp_threshold;  // dB
    double comp_ratio;
    double exp_threshold;  // dB
    double exp_ratio;      // (0, 1]
    double attack;         // ms
    double release;        // ms
    double output_gain;    // dB
};

struct ChainParams {
    EqParams eq;
    DistortionParams distortion;
    MultibandParams multiband;
    double makeup_gain;  // dB
    double width;        // [0, 2]
    LimiterParams limiter;

    std::array<double, kNumParams> to_vector() const;
    static ChainParams from_vector(std::span<const double> values);

    bool operator==(const ChainParams&) const;
};

struct ModuleMask {
    std::array<bool, kNumModules> enabled{};

    static ModuleMask all_on();
    static ModuleMask all_off();

    bool operator[](Module m) const { return enabled[static_cast<std::size_t>(m)]; }
    bool& operator[](Module m) { return enabled[static_cast<std::size_t>(m)]; }
    bool operator==(const ModuleMask&) const = default;
};

/// Identity-behaving configuration: zero gains, unit ratios, 0 dB thresholds,
/// mix 0, width 1.
ChainParams neutral_params();

/// Per-field schema ranges plus xover_low < xover_high and
/// exp_threshold < comp_threshold. Throws a range error.
void validate(const ChainParams& params);

/// True when every field is inside its schema range and the ordering
/// constraints hold.
bool is_valid(const ChainParams& params);

// Sigmoid reparameterization. Log-scale parameters are squashed in the log
// domain. |u| is clamped to 20; at the clamp the value saturates to the
// endpoint and the derivative is zero.
inline constexpr double kUnconstrainedLimit = 20.0;

double to_physical(const ParamSpec& spec, double u);
double to_physical_derivative(const ParamSpec& spec, double u);
double to_unconstrained(const ParamSpec& spec, double value);

// Unit coordinates: t in [0, 1] maps linearly (or log-linearly) onto the
// schema range; t = sigmoid(u). Inputs outside [0, 1] are clamped and have
// zero derivative.
double from_unit(const ParamSpec& spec, double t);
double from_unit_derivative(const ParamSpec& spec, double t);
double to_unit(const ParamSpec& spec, double value);

std::vector<double> params_to_unit(const ChainParams& params);
ChainParams unit_to_params(std::span<const double> t);

std::vector<double> params_to_unconstrained(const ChainParams& params);
ChainParams unconstrained_to_params(std::span<const double> u);

// JSON: {"schema_version": 1, "params": {group: {name: value}}}. Unknown
// keys are rejected; missing keys take their neutral value.
nlohmann::json to_json(const ChainParams& params);
ChainParams chain_params_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ModuleMask& mask);
ModuleMask module_mask_from_json(const nlohmann::json& j);

}  // namespace fxfit
