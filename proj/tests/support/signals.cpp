#include "support/signals.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <numbers>

#include "fxfit/sampler.hpp"

namespace fxfit::test {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double gaussian(Rng& rng) {
    const double u1 = std::max(rng.uniform(), 1e-300);
    const double u2 = rng.uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

std::size_t frames_for(double seconds) { return static_cast<std::size_t>(std::lround(seconds * kSampleRate)); }

void add_hit(std::vector<double>& out, std::size_t at, const std::vector<double>& hit, double gain) {
    for (std::size_t i = 0; i < hit.size() && at + i < out.size(); ++i) out[at + i] += gain * hit[i];
}

std::vector<double> kick() {
    std::vector<double> h(frames_for(0.25));
    double phase = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double t = static_cast<double>(i) / kSampleRate;
        const double f = 45.0 + 110.0 * std::exp(-t * 30.0);
        phase += kTwoPi * f / kSampleRate;
        h[i] = std::sin(phase) * std::exp(-t * 12.0);
    }
    return h;
}

std::vector<double> noise_hit(double seconds, double decay, double tone, Rng& rng) {
    std::vector<double> h(frames_for(seconds));
    double lp = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double t = static_cast<double>(i) / kSampleRate;
        const double n = gaussian(rng);
        lp += 0.3 * (n - lp);
        const double bright = n - lp;  // crude high-pass
        h[i] = (0.6 * bright + tone * std::sin(kTwoPi * 190.0 * t)) * std::exp(-t * decay);
    }
    return h;
}

}  // namespace

StereoBuffer white_noise(std::size_t frames, double stddev, std::uint64_t seed, double correlation) {
    Rng rng(seed);
    StereoBuffer x(frames);
    const double side = std::sqrt(1.0 - correlation * correlation);
    for (std::size_t i = 0; i < frames; ++i) {
        const double a = gaussian(rng);
        const double b = gaussian(rng);
        x.left[i] = stddev * a;
        x.right[i] = stddev * (correlation * a + side * b);
    }
    return x;
}

StereoBuffer pink_noise(std::size_t frames, double amplitude, std::uint64_t seed, bool mono) {
    Rng rng(seed);
    StereoBuffer x(frames);
    for (int c = 0; c < (mono ? 1 : 2); ++c) {
        std::array<double, 16> rows{};
        for (double& r : rows) r = rng.uniform(-1.0, 1.0);
        double sum = 0.0;
        for (double r : rows) sum += r;
        auto& out = c == 0 ? x.left : x.right;
        for (std::size_t i = 0; i < frames; ++i) {
            // Row k updates every 2^k samples.
            const std::size_t counter = i + 1;
            const auto k = static_cast<std::size_t>(std::countr_zero(counter));
            if (k < rows.size()) {
                sum -= rows[k];
                rows[k] = rng.uniform(-1.0, 1.0);
                sum += rows[k];
            }
            out[i] = amplitude * (sum + rng.uniform(-1.0, 1.0)) / 17.0;
        }
    }
    if (mono) x.right = x.left;
    return x;
}

std::vector<double> sine_channel(std::size_t frames, double freq, double amplitude, double phase) {
    std::vector<double> v(frames);
    for (std::size_t i = 0; i < frames; ++i)
        v[i] = amplitude * std::sin(kTwoPi * freq * static_cast<double>(i) / kSampleRate + phase);
    return v;
}

StereoBuffer sine(std::size_t frames, double freq, double amplitude, double phase) {
    auto v = sine_channel(frames, freq, amplitude, phase);
    return StereoBuffer(v, v);
}

StereoBuffer square(std::size_t frames, double freq, double amplitude) {
    std::vector<double> v(frames);
    const double period = kSampleRate / freq;
    for (std::size_t i = 0; i < frames; ++i) {
        const double pos = std::fmod(static_cast<double>(i), period);
        v[i] = pos < period / 2.0 ? amplitude : -amplitude;
    }
    return StereoBuffer(v, v);
}

StereoBuffer drum_loop(double seconds, std::uint64_t seed, double bpm) {
    Rng rng(seed);
    const std::size_t n = frames_for(seconds);
    StereoBuffer x(n);
    const auto k = kick();
    const auto s = noise_hit(0.2, 18.0, 0.5, rng);
    const auto h = noise_hit(0.05, 60.0, 0.0, rng);
    const double sixteenth = 60.0 / bpm / 4.0;
    const auto steps = static_cast<std::size_t>(seconds / sixteenth);
    for (std::size_t i = 0; i < steps; ++i) {
        const auto at = static_cast<std::size_t>(std::lround(static_cast<double>(i) * sixteenth * kSampleRate));
        const std::size_t pos = i % 16;
        if (pos == 0 || pos == 8 || pos == 10) {
            const double v = rng.uniform(0.35, 0.9);
            add_hit(x.left, at, k, v);
            add_hit(x.right, at, k, v);
        }
        if (pos == 4 || pos == 12) {
            const double v = rng.uniform(0.2, 0.7);
            add_hit(x.left, at, s, v);
            add_hit(x.right, at, s, 0.9 * v);
        }
        if (pos % 2 == 0) {
            const double v = rng.uniform(0.05, 0.25);
            add_hit(x.left, at, h, 0.7 * v);
            add_hit(x.right, at, h, v);
        }
    }
    return x;
}

StereoBuffer synthetic_music(double seconds, std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t n = frames_for(seconds);
    StereoBuffer x = drum_loop(seconds, seed ^ 0x5bd1e995ULL, 110.0);
    for (auto* ch : {&x.left, &x.right})
        for (double& v : *ch) v *= 0.6;

    // Bar-wise chord roots (semitones from A2).
    const std::array<int, 4> roots = {0, 5, 7, 3};
    const double bar = 4.0 * 60.0 / 110.0;
    const double root_hz = 110.0;
    double bass_phase = 0.0, lead_phase = 0.0;
    double lead_hz = 440.0;
    std::array<double, 3> pad_phase{};
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / kSampleRate;
        const auto bar_index = static_cast<std::size_t>(t / bar);
        const int root = roots[bar_index % roots.size()] + static_cast<int>((seed % 3));
        const double f0 = root_hz * std::pow(2.0, root / 12.0);
        const double beat_pos = std::fmod(t, bar / 4.0) / (bar / 4.0);

        bass_phase += kTwoPi * f0 / 2.0 / kSampleRate;
        const double bass = 0.25 * std::tanh(2.0 * std::sin(bass_phase)) * (0.6 + 0.4 * std::exp(-beat_pos * 4.0));

        const std::array<double, 3> intervals = {0.0, 4.0, 7.0};
        double pad_l = 0.0, pad_r = 0.0;
        for (std::size_t v = 0; v < 3; ++v) {
            pad_phase[v] += kTwoPi * f0 * 2.0 * std::pow(2.0, intervals[v] / 12.0) / kSampleRate;
            const double s = std::sin(pad_phase[v]) + 0.3 * std::sin(2.0 * pad_phase[v]);
            const double pan = 0.2 + 0.3 * static_cast<double>(v);
            pad_l += (1.0 - pan) * s;
            pad_r += pan * s;
        }
        if (i % 11025 == 0) lead_hz = f0 * 4.0 * std::pow(2.0, static_cast<double>(rng.below_or_equal(7)) / 12.0);
        lead_phase += kTwoPi * lead_hz / kSampleRate;
        const double env = std::exp(-std::fmod(t, 0.25) * 6.0);
        const double lead = 0.08 * env * (std::sin(lead_phase) + 0.5 * std::sin(3.0 * lead_phase) / 3.0);

        x.left[i] += bass + 0.06 * pad_l + 0.7 * lead;
        x.right[i] += bass + 0.06 * pad_r + 0.4 * lead;
    }
    return x;
}

double rms_db(const std::vector<double>& x, std::size_t begin, std::size_t end) {
    if (end == 0) end = x.size();
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += x[i] * x[i];
    return 10.0 * std::log10(s / static_cast<double>(end - begin));
}

double peak_db(const std::vector<double>& x, std::size_t begin, std::size_t end) {
    if (end == 0) end = x.size();
    double p = 0.0;
    for (std::size_t i = begin; i < end; ++i) p = std::max(p, std::abs(x[i]));
    return 20.0 * std::log10(p);
}

}  // namespace fxfit::test
