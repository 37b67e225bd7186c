#include <cmath>
#include <numbers>

#include "fxfit/analysis.hpp"
#include "fxfit/biquad.hpp"
#include "fxfit/error.hpp"

namespace fxfit {

namespace {

constexpr double kBlockSeconds = 0.4;
constexpr double kStepSeconds = 0.1;
constexpr double kAbsoluteGate = -70.0;
constexpr double kRelativeGate = -10.0;
constexpr double kOffset = -0.691;

// Analog prototype of the BS.1770 pre-filter, re-derived for any rate.
Biquad shelf_stage(double fs) {
    const double f0 = 1681.974450955533;
    const double g = 3.999843853973347;
    const double q = 0.7071752369554196;
    const double k = std::tan(std::numbers::pi * f0 / fs);
    const double vh = std::pow(10.0, g / 20.0);
    const double vb = std::pow(vh, 0.4996667741545416);
    const double a0 = 1.0 + k / q + k * k;
    return {(vh + vb * k / q + k * k) / a0, 2.0 * (k * k - vh) / a0, (vh - vb * k / q + k * k) / a0,
            2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0};
}

Biquad highpass_stage(double fs) {
    const double f0 = 38.13547087602444;
    const double q = 0.5003270373238773;
    const double k = std::tan(std::numbers::pi * f0 / fs);
    const double a0 = 1.0 + k / q + k * k;
    return {1.0, -2.0, 1.0, 2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0};
}

double block_loudness(double power) { return kOffset + 10.0 * std::log10(power); }

}  // namespace

std::vector<double> k_weight(std::span<const double> x, int sample_rate) {
    const double fs = static_cast<double>(sample_rate);
    std::vector<double> a(x.size()), b(x.size());
    biquad_forward(shelf_stage(fs), x, a);
    biquad_forward(highpass_stage(fs), a, b);
    return b;
}

double integrated_loudness(const StereoBuffer& x) {
    x.validate();
    const auto block = static_cast<std::size_t>(std::lround(kBlockSeconds * x.sample_rate));
    const auto step = static_cast<std::size_t>(std::lround(kStepSeconds * x.sample_rate));
    require(x.size() >= block, ErrorKind::shape, "loudness needs at least 400 ms of audio");

    const auto kl = k_weight(x.left, x.sample_rate);
    const auto kr = k_weight(x.right, x.sample_rate);
    std::vector<double> power(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) power[i] = kl[i] * kl[i] + kr[i] * kr[i];

    std::vector<double> powers;
    for (std::size_t start = 0; start + block <= x.size(); start += step) {
        double p = 0.0;
        for (std::size_t i = start; i < start + block; ++i) p += power[i];
        p /= static_cast<double>(block);
        if (p > 0.0 && block_loudness(p) > kAbsoluteGate) powers.push_back(p);
    }
    if (powers.empty()) return kSilentLoudness;
    double mean = 0.0;
    for (double p : powers) mean += p;
    mean /= static_cast<double>(powers.size());
    const double relative = block_loudness(mean) + kRelativeGate;
    double gated = 0.0;
    std::size_t count = 0;
    for (double p : powers) {
        if (block_loudness(p) > relative) {
            gated += p;
            ++count;
        }
    }
    if (count == 0) return kSilentLoudness;
    return block_loudness(gated / static_cast<double>(count));
}

}  // namespace fxfit
