#include "fxfit/params.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "fxfit/error.hpp"

namespace fxfit {

namespace {

using enum ParamScale;

std::array<ParamSpec, kNumParams> build_schema() {
    std::array<ParamSpec, kNumParams> s{};
    std::size_t i = 0;
    auto add = [&](std::string_view group, std::string_view name, std::string_view unit, double lo,
                   double hi, double neutral, ParamScale scale, Module m) {
        s[i++] = ParamSpec{group, name, unit, lo, hi, neutral, scale, m};
    };
    auto mid = [](double lo, double hi, ParamScale scale) {
        if (scale == log) return std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * 0.5);
        return lo + (hi - lo) * 0.5;
    };

    static constexpr std::array<std::array<double, 2>, kNumEqBands> eq_freq{{
        {30.0, 200.0}, {100.0, 800.0}, {300.0, 2400.0}, {1000.0, 8000.0}, {3000.0, 16000.0}, {6000.0, 20000.0},
    }};
    static constexpr std::array<std::string_view, kNumEqBands * 3> eq_names{
        "band1_center_freq", "band1_gain", "band1_q", "band2_center_freq", "band2_gain", "band2_q",
        "band3_center_freq", "band3_gain", "band3_q", "band4_center_freq", "band4_gain", "band4_q",
        "band5_center_freq", "band5_gain", "band5_q", "band6_center_freq", "band6_gain", "band6_q",
    };
    for (std::size_t b = 0; b < kNumEqBands; ++b) {
        const auto [lo, hi] = eq_freq[b];
        add("eq", eq_names[3 * b], "Hz", lo, hi, mid(lo, hi, log), log, Module::equalizer);
        add("eq", eq_names[3 * b + 1], "dB", -12.0, 12.0, 0.0, linear, Module::equalizer);
        add("eq", eq_names[3 * b + 2], "", 0.3, 5.0, mid(0.3, 5.0, log), log, Module::equalizer);
    }

    add("distortion", "drive", "dB", 0.0, 24.0, 12.0, linear, Module::distortion);
    add("distortion", "mix", "", 0.0, 1.0, 0.0, linear, Module::distortion);

    add("multiband_comp", "xover_low", "Hz", 40.0, 1000.0, mid(40.0, 1000.0, log), log, Module::multiband_comp);
    add("multiband_comp", "xover_high", "Hz", 1000.0, 12000.0, mid(1000.0, 12000.0, log), log,
        Module::multiband_comp);
    static constexpr std::array<std::string_view, kNumCompBands * 5> comp_names{
        "low_threshold", "low_ratio", "low_attack", "low_release", "low_makeup",
        "mid_threshold", "mid_ratio", "mid_attack", "mid_release", "mid_makeup",
        "high_threshold", "high_ratio", "high_attack", "high_release", "high_makeup",
    };
    for (std::size_t b = 0; b < kNumCompBands; ++b) {
        add("multiband_comp", comp_names[5 * b], "dB", -48.0, 0.0, 0.0, linear, Module::multiband_comp);
        add("multiband_comp", comp_names[5 * b + 1], "", 1.0, 20.0, 1.0, log, Module::multiband_comp);
        add("multiband_comp", comp_names[5 * b + 2], "ms", 0.1, 100.0, mid(0.1, 100.0, log), log,
            Module::multiband_comp);
        add("multiband_comp", comp_names[5 * b + 3], "ms", 10.0, 1000.0, mid(10.0, 1000.0, log), log,
            Module::multiband_comp);
        add("multiband_comp", comp_names[5 * b + 4], "dB", -12.0, 12.0, 0.0, linear, Module::multiband_comp);
    }

    add("makeup_gain", "gain", "dB", -12.0, 12.0, 0.0, linear, Module::makeup_gain);
    add("stereo_imager", "width", "", 0.0, 2.0, 1.0, linear, Module::stereo_imager);

    add("limiter", "comp_threshold", "dB", -48.0, 0.0, 0.0, linear, Module::limiter);
    add("limiter", "comp_ratio", "", 1.0, 20.0, 1.0, log, Module::limiter);
    add("limiter", "exp_threshold", "dB", -80.0, -20.0, -50.0, linear, Module::limiter);
    add("limiter", "exp_ratio", "", 0.25, 1.0, 1.0, log, Module::limiter);
    add("limiter", "attack", "ms", 0.1, 100.0, mid(0.1, 100.0, log), log, Module::limiter);
    add("limiter", "release", "ms", 10.0, 1000.0, mid(10.0, 1000.0, log), log, Module::limiter);
    add("limiter", "output_gain", "dB", -12.0, 12.0, 0.0, linear, Module::limiter);
    return s;
}

}  // namespace

std::string_view module_name(Module m) {
    switch (m) {
        case Module::equalizer: return "eq";
        case Module::distortion: return "distortion";
        case Module::multiband_comp: return "multiband_comp";
        case Module::makeup_gain: return "makeup_gain";
        case Module::stereo_imager: return "stereo_imager";
        case Module::limiter: return "limiter";
    }
    return "unknown";
}

std::string ParamSpec::full_name() const {
    std::string s(group);
    s += '.';
    s += name;
    return s;
}

const std::array<ParamSpec, kNumParams>& param_schema() {
    static const std::array<ParamSpec, kNumParams> schema = build_schema();
    return schema;
}

std::array<double, kNumParams> ChainParams::to_vector() const {
    std::array<double, kNumParams> v{};
    std::size_t i = 0;
    for (const auto& b : eq.bands) {
        v[i++] = b.center_freq;
        v[i++] = b.gain;
        v[i++] = b.q;
    }
    v[i++] = distortion.drive;
    v[i++] = distortion.mix;
    v[i++] = multiband.xover_low;
    v[i++] = multiband.xover_high;
    for (const auto& b : multiband.bands) {
        v[i++] = b.threshold;
        v[i++] = b.ratio;
        v[i++] = b.attack;
        v[i++] = b.release;
        v[i++] = b.makeup;
    }
    v[i++] = makeup_gain;
    v[i++] = width;
    v[i++] = limiter.comp_threshold;
    v[i++] = limiter.comp_ratio;
    v[i++] = limiter.exp_threshold;
    v[i++] = limiter.exp_ratio;
    v[i++] = limiter.attack;
    v[i++] = limiter.release;
    v[i++] = limiter.output_gain;
    return v;
}

ChainParams ChainParams::from_vector(std::span<const double> v) {
    require(v.size() == kNumParams, ErrorKind::shape,
            "parameter vector must have " + std::to_string(kNumParams) + " entries");
    ChainParams p{};
    std::size_t i = 0;
    for (auto& b : p.eq.bands) {
        b.center_freq = v[i++];
        b.gain = v[i++];
        b.q = v[i++];
    }
    p.distortion.drive = v[i++];
    p.distortion.mix = v[i++];
    p.multiband.xover_low = v[i++];
    p.multiband.xover_high = v[i++];
    for (auto& b : p.multiband.bands) {
        b.threshold = v[i++];
        b.ratio = v[i++];
        b.attack = v[i++];
        b.release = v[i++];
        b.makeup = v[i++];
    }
    p.makeup_gain = v[i++];
    p.width = v[i++];
    p.limiter.comp_threshold = v[i++];
    p.limiter.comp_ratio = v[i++];
    p.limiter.exp_threshold = v[i++];
    p.limiter.exp_ratio = v[i++];
    p.limiter.attack = v[i++];
    p.limiter.release = v[i++];
    p.limiter.output_gain = v[i++];
    return p;
}

bool ChainParams::operator==(const ChainParams& other) const { return to_vector() == other.to_vector(); }

ModuleMask ModuleMask::all_on() {
    ModuleMask m;
    m.enabled.fill(true);
    return m;
}

ModuleMask ModuleMask::all_off() { return ModuleMask{}; }

ChainParams neutral_params() {
    std::array<double, kNumParams> v{};
    const auto& schema = param_schema();
    for (std::size_t i = 0; i < kNumParams; ++i) v[i] = schema[i].neutral;
    return ChainParams::from_vector(v);
}

void validate(const ChainParams& params) {
    const auto v = params.to_vector();
    const auto& schema = param_schema();
    for (std::size_t i = 0; i < kNumParams; ++i) {
        const auto& s = schema[i];
        if (!(v[i] >= s.min && v[i] <= s.max)) {
            fail(ErrorKind::range, s.full_name() + " = " + std::to_string(v[i]) + " outside [" +
                                       std::to_string(s.min) + ", " + std::to_string(s.max) + "]");
        }
    }
    require(params.multiband.xover_low < params.multiband.xover_high, ErrorKind::range,
            "multiband_comp.xover_low must be below xover_high");
    require(params.limiter.exp_threshold < params.limiter.comp_threshold, ErrorKind::range,
            "limiter.exp_threshold must be below comp_threshold");
}

bool is_valid(const ChainParams& params) {
    try {
        validate(params);
        return true;
    } catch (const Error&) {
        return false;
    }
}

namespace {

double sigmoid(double u) {
    if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
    const double e = std::exp(u);
    return e / (1.0 + e);
}

}  // namespace

double from_unit(const ParamSpec& spec, double t) {
    t = std::clamp(t, 0.0, 1.0);
    if (spec.scale == ParamScale::log) {
        const double lo = std::log(spec.min);
        const double hi = std::log(spec.max);
        return std::exp(lo + (hi - lo) * t);
    }
    return spec.min + (spec.max - spec.min) * t;
}

double from_unit_derivative(const ParamSpec& spec, double t) {
    if (t < 0.0 || t > 1.0) return 0.0;
    if (spec.scale == ParamScale::log) {
        const double lo = std::log(spec.min);
        const double hi = std::log(spec.max);
        return std::exp(lo + (hi - lo) * t) * (hi - lo);
    }
    return spec.max - spec.min;
}

double to_unit(const ParamSpec& spec, double value) {
    double t;
    if (spec.scale == ParamScale::log) {
        const double lo = std::log(spec.min);
        const double hi = std::log(spec.max);
        t = (std::log(value) - lo) / (hi - lo);
    } else {
        t = (value - spec.min) / (spec.max - spec.min);
    }
    if (!(t > 0.0)) return 0.0;
    if (!(t < 1.0)) return 1.0;
    return t;
}

double to_physical(const ParamSpec& spec, double u) {
    if (u >= kUnconstrainedLimit) return spec.max;
    if (u <= -kUnconstrainedLimit) return spec.min;
    return from_unit(spec, sigmoid(u));
}

double to_physical_derivative(const ParamSpec& spec, double u) {
    if (u >= kUnconstrainedLimit || u <= -kUnconstrainedLimit) return 0.0;
    const double t = sigmoid(u);
    return from_unit_derivative(spec, t) * t * (1.0 - t);
}

double to_unconstrained(const ParamSpec& spec, double value) {
    const double t = to_unit(spec, value);
    if (t == 0.0) return -kUnconstrainedLimit;
    if (t == 1.0) return kUnconstrainedLimit;
    const double u = std::log(t) - std::log1p(-t);
    return std::clamp(u, -kUnconstrainedLimit, kUnconstrainedLimit);
}

std::vector<double> params_to_unconstrained(const ChainParams& params) {
    const auto v = params.to_vector();
    const auto& schema = param_schema();
    std::vector<double> u(kNumParams);
    for (std::size_t i = 0; i < kNumParams; ++i) u[i] = to_unconstrained(schema[i], v[i]);
    return u;
}

std::vector<double> params_to_unit(const ChainParams& params) {
    const auto v = params.to_vector();
    const auto& schema = param_schema();
    std::vector<double> t(kNumParams);
    for (std::size_t i = 0; i < kNumParams; ++i) t[i] = to_unit(schema[i], v[i]);
    return t;
}

ChainParams unit_to_params(std::span<const double> t) {
    require(t.size() == kNumParams, ErrorKind::shape, "unit vector must have " + std::to_string(kNumParams) + " entries");
    const auto& schema = param_schema();
    std::array<double, kNumParams> v{};
    for (std::size_t i = 0; i < kNumParams; ++i) v[i] = from_unit(schema[i], t[i]);
    return ChainParams::from_vector(v);
}

ChainParams unconstrained_to_params(std::span<const double> u) {
    require(u.size() == kNumParams, ErrorKind::shape,
            "unconstrained vector must have " + std::to_string(kNumParams) + " entries");
    const auto& schema = param_schema();
    std::array<double, kNumParams> v{};
    for (std::size_t i = 0; i < kNumParams; ++i) v[i] = to_physical(schema[i], u[i]);
    return ChainParams::from_vector(v);
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::json to_json(const ChainParams& params) {
    const auto v = params.to_vector();
    const auto& schema = param_schema();
    nlohmann::json groups = nlohmann::json::object();
    for (std::size_t i = 0; i < kNumParams; ++i)
        groups[std::string(schema[i].group)][std::string(schema[i].name)] = v[i];
    return {{"schema_version", 1}, {"params", groups}};
}

ChainParams chain_params_from_json(const nlohmann::json& j) {
    require(j.is_object(), ErrorKind::format, "chain parameters must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        require(key == "schema_version" || key == "params", ErrorKind::format,
                "unknown key '" + key + "' in chain parameters");
    }
    require(j.contains("schema_version") && j["schema_version"].is_number_integer() &&
                j["schema_version"].get<int>() == 1,
            ErrorKind::format, "chain parameters must have schema_version 1");
    require(j.contains("params") && j["params"].is_object(), ErrorKind::format,
            "chain parameters need a 'params' object");

    const auto& schema = param_schema();
    auto values = neutral_params().to_vector();
    for (const auto& [group, members] : j["params"].items()) {
        require(members.is_object(), ErrorKind::format, "group '" + group + "' must be an object");
        for (const auto& [name, value] : members.items()) {
            std::size_t idx = kNumParams;
            for (std::size_t i = 0; i < kNumParams; ++i) {
                if (schema[i].group == group && schema[i].name == name) {
                    idx = i;
                    break;
                }
            }
            require(idx < kNumParams, ErrorKind::format, "unknown parameter '" + group + "." + name + "'");
            require(value.is_number(), ErrorKind::format, "parameter '" + group + "." + name + "' must be a number");
            values[idx] = value.get<double>();
        }
    }
    auto params = ChainParams::from_vector(values);
    validate(params);
    return params;
}

nlohmann::json to_json(const ModuleMask& mask) {
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t i = 0; i < kNumModules; ++i) j[std::string(module_name(static_cast<Module>(i)))] = mask.enabled[i];
    return j;
}

ModuleMask module_mask_from_json(const nlohmann::json& j) {
    require(j.is_object(), ErrorKind::format, "module mask must be a JSON object");
    ModuleMask mask = ModuleMask::all_off();
    std::array<bool, kNumModules> seen{};
    for (const auto& [key, value] : j.items()) {
        std::size_t idx = kNumModules;
        for (std::size_t i = 0; i < kNumModules; ++i)
            if (module_name(static_cast<Module>(i)) == key) idx = i;
        require(idx < kNumModules, ErrorKind::format, "unknown module '" + key + "' in mask");
        require(value.is_boolean(), ErrorKind::format, "mask entry '" + key + "' must be boolean");
        mask.enabled[idx] = value.get<bool>();
        seen[idx] = true;
    }
    for (std::size_t i = 0; i < kNumModules; ++i)
        require(seen[i], ErrorKind::format,
                "mask is missing module '" + std::string(module_name(static_cast<Module>(i))) + "'");
    return mask;
}

}  // namespace fxfit
