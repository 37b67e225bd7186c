#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <nlohmann/json.hpp>

#include "fxfit/biquad.hpp"
#include "fxfit/error.hpp"
#include "fxfit/fx.hpp"
#include "fxfit/params.hpp"
#include "fxfit/sampler.hpp"
#include "fxfit/stft.hpp"
#include "support/signals.hpp"

using namespace fxfit;
using Catch::Approx;

namespace {

ErrorKind kind_of(const auto& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error thrown");
    return ErrorKind::precondition;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// Steady-state gain of a processor at one frequency, from the RMS ratio of
// the last second of a 2 s sine.
double sine_gain_db(const auto& process, double freq) {
    const auto x = test::sine(2 * kSampleRate, freq, 0.25);
    const auto y = process(x);
    return test::rms_db(y.left, kSampleRate) - test::rms_db(x.left, kSampleRate);
}

// Magnitude (dB) of the summed bands, from the impulse response.
std::vector<double> band_sum_response_db(double lo, double hi, std::size_t fft) {
    StereoBuffer x(1 << 17);
    x.left[0] = x.right[0] = 1.0;
    const BandSplit b = split_bands(x, lo, hi);
    std::vector<double> h(fft, 0.0);
    for (std::size_t i = 0; i < std::min<std::size_t>(fft, x.size()); ++i)
        h[i] = b.low.left[i] + b.mid.left[i] + b.high.left[i];
    RealFft f(fft);
    std::vector<std::complex<double>> spec(f.bins());
    f.forward(h, spec);
    std::vector<double> db(spec.size());
    for (std::size_t k = 0; k < spec.size(); ++k) db[k] = 20.0 * std::log10(std::abs(spec[k]));
    return db;
}

ChainParams with_limiter(double thr, double ratio, double attack = 1.0, double release = 100.0) {
    ChainParams p = neutral_params();
    p.limiter.comp_threshold = thr;
    p.limiter.comp_ratio = ratio;
    p.limiter.attack = attack;
    p.limiter.release = release;
    return p;
}

double peak_db(const std::vector<double>& x, std::size_t begin) { return test::peak_db(x, begin); }

}  // namespace

TEST_CASE("schema shape") {
    const auto& s = param_schema();
    CHECK(s.size() == 46);
    for (const auto& p : s) {
        CHECK(p.min < p.max);
        CHECK(p.neutral >= p.min);
        CHECK(p.neutral <= p.max);
        if (p.scale == ParamScale::log) CHECK(p.min > 0.0);
    }
    std::array<int, kNumModules> per_module{};
    for (const auto& p : s) ++per_module[static_cast<std::size_t>(p.module)];
    CHECK(per_module == std::array<int, kNumModules>{18, 2, 17, 1, 1, 7});
}

TEST_CASE("parameter flattening round trip") {
    const ChainParams p = sample_style(3).params;
    const auto v = p.to_vector();
    CHECK(ChainParams::from_vector(v) == p);
    CHECK(kind_of([&] { ChainParams::from_vector(std::vector<double>(45, 0.0)); }) == ErrorKind::shape);
}

TEST_CASE("neutral parameters") {
    const ChainParams n = neutral_params();
    for (const auto& b : n.eq.bands) CHECK(b.gain == 0.0);
    CHECK(n.distortion.mix == 0.0);
    for (const auto& b : n.multiband.bands) {
        CHECK(b.ratio == 1.0);
        CHECK(b.threshold == 0.0);
    }
    CHECK(n.makeup_gain == 0.0);
    CHECK(n.width == 1.0);
    CHECK(n.limiter.comp_ratio == 1.0);
    CHECK(n.limiter.comp_threshold == 0.0);
    CHECK(n.limiter.exp_ratio == 1.0);
    CHECK(n.limiter.output_gain == 0.0);
    CHECK(is_valid(n));
}

TEST_CASE("neutral processors are identities") {
    const StereoBuffer x = test::drum_loop(1.0, 3);
    const ChainParams n = neutral_params();
    CHECK(apply_equalizer(x, n.eq) == x);
    CHECK(apply_distortion(x, 17.0, 0.0) == x);
    CHECK(apply_makeup_gain(x, 0.0) == x);
    CHECK(apply_stereo_imager(x, 1.0) == x);
    const StereoBuffer lim = apply_limiter(x, n.limiter);
    CHECK(max_abs_diff(lim.left, x.left) < 1e-6);
    CHECK(max_abs_diff(lim.right, x.right) < 1e-6);
    CHECK(apply_chain(x, n, ModuleMask::all_off()) == x);
    CHECK(apply_chain(x, sample_style(9).params, ModuleMask::all_off()) == x);
}

TEST_CASE("peaking band +6 dB at 1 kHz") {
    EqParams eq = neutral_params().eq;
    eq.bands[2] = {1000.0, 6.0, 1.0};
    CHECK(sine_gain_db([&](const StereoBuffer& x) { return apply_equalizer(x, eq); }, 1000.0) ==
          Approx(6.0).margin(0.05));
    CHECK(biquad_magnitude_db(design_peaking(1000.0, 6.0, 1.0, kSampleRate), 1000.0, kSampleRate) ==
          Approx(6.0).margin(1e-9));
}

TEST_CASE("low shelf -12 dB at 100 Hz") {
    EqParams eq = neutral_params().eq;
    eq.bands[0] = {100.0, -12.0, 0.707};
    auto f = [&](const StereoBuffer& x) { return apply_equalizer(x, eq); };
    const double at20 = sine_gain_db(f, 20.0);
    const double at10k = sine_gain_db(f, 10000.0);
    CHECK(at20 >= -12.5);
    CHECK(at20 <= -11.5);
    CHECK(std::abs(at10k) <= 0.2);
}

TEST_CASE("equalizer applies the same filter to both channels") {
    const StereoBuffer x = test::white_noise(4096, 0.1, 4);
    EqParams eq = sample_style(4).params.eq;
    const StereoBuffer y = apply_equalizer(x, eq);
    const StereoBuffer yl = apply_equalizer(StereoBuffer(x.left, x.left), eq);
    CHECK(y.left == yl.left);
    CHECK(y.size() == x.size());
}

TEST_CASE("distortion") {
    const StereoBuffer half(std::vector<double>{0.5}, std::vector<double>{-0.5});
    const StereoBuffer y = apply_distortion(half, 0.0, 1.0);
    CHECK(y.left[0] == Approx(std::tanh(0.5) / std::tanh(1.0)).epsilon(1e-14));
    CHECK(y.left[0] == Approx(0.60678).margin(1e-5));
    CHECK(y.right[0] == -y.left[0]);

    const StereoBuffer sine = test::sine(kSampleRate, 441.0, 1.0);
    const StereoBuffer d = apply_distortion(sine, 20.0, 1.0);
    double peak = 0.0;
    for (double v : d.left) peak = std::max(peak, std::abs(v));
    CHECK(peak <= 1.0 / std::tanh(10.0) + 1e-8);

    // THD from harmonic bins of an exactly periodic 1 s segment.
    RealFft f(1 << 15);
    std::vector<double> seg(d.left.begin(), d.left.begin() + (1 << 15));
    const auto w = hann_window(seg.size());
    for (std::size_t i = 0; i < seg.size(); ++i) seg[i] *= w[i];
    std::vector<std::complex<double>> spec(f.bins());
    f.forward(seg, spec);
    auto band_power = [&](double freq) {
        const auto k = static_cast<std::size_t>(std::lround(freq * seg.size() / kSampleRate));
        double p = 0.0;
        for (std::size_t j = k - 3; j <= k + 3; ++j) p += std::norm(spec[j]);
        return p;
    };
    double harmonics = 0.0;
    for (int h = 2; h <= 15; ++h) harmonics += band_power(441.0 * h);
    CHECK(std::sqrt(harmonics / band_power(441.0)) > 0.10);
    CHECK(kind_of([&] { apply_distortion(sine, 30.0, 1.0); }) == ErrorKind::range);
    CHECK(kind_of([&] { apply_distortion(sine, 3.0, 1.5); }) == ErrorKind::range);
}

TEST_CASE("LR4 split sums to a flat response") {
    for (auto [lo, hi] : {std::pair{200.0, 2000.0}, std::pair{100.0, 8000.0}, std::pair{40.0, 12000.0},
                          std::pair{999.0, 1001.0}}) {
        const std::size_t fft = 1 << 16;
        const auto db = band_sum_response_db(lo, hi, fft);
        double worst = 0.0;
        for (std::size_t k = 0; k < db.size(); ++k) {
            const double f = static_cast<double>(k) * kSampleRate / fft;
            if (f >= 20.0 && f <= 20000.0) worst = std::max(worst, std::abs(db[k]));
        }
        CHECK(worst < 0.1);
    }
}

TEST_CASE("LR4 bands route energy") {
    auto energy = [](const StereoBuffer& b) {
        double e = 0.0;
        for (std::size_t i = kSampleRate / 2; i < b.size(); ++i) e += b.left[i] * b.left[i];
        return e;
    };
    for (double f : {50.0, 8000.0}) {
        const BandSplit s = split_bands(test::sine(kSampleRate, f, 0.5), 200.0, 2000.0);
        const double total = energy(s.low) + energy(s.mid) + energy(s.high);
        CHECK((f < 1000.0 ? energy(s.low) : energy(s.high)) >= 0.99 * total);
    }
    const StereoBuffer x = test::sine(1024, 100.0, 0.5);
    CHECK(kind_of([&] { split_bands(x, 2000.0, 200.0); }) == ErrorKind::range);
    CHECK(kind_of([&] { split_bands(x, 30.0, 200.0); }) == ErrorKind::range);
    CHECK(kind_of([&] { split_bands(x, 500.0, 13000.0); }) == ErrorKind::range);
}

TEST_CASE("multiband compressor at unit ratios is allpass") {
    const StereoBuffer x = test::white_noise(1 << 16, 0.1, 8);
    MultibandParams mb = neutral_params().multiband;
    mb.xover_low = 150.0;
    mb.xover_high = 3000.0;
    const StereoBuffer y = apply_multiband_compressor(x, mb);
    StereoBuffer imp(1 << 16);
    imp.left[0] = 1.0;
    const auto h = apply_multiband_compressor(imp, mb).left;
    RealFft f(1 << 16);
    std::vector<std::complex<double>> spec(f.bins());
    f.forward(h, spec);
    double worst = 0.0;
    for (std::size_t k = 1; k < spec.size(); ++k) {
        const double freq = static_cast<double>(k) * kSampleRate / (1 << 16);
        if (freq >= 20.0 && freq <= 20000.0) worst = std::max(worst, std::abs(20.0 * std::log10(std::abs(spec[k]))));
    }
    CHECK(worst < 0.1);
    CHECK(y != x);  // phase is altered
}

TEST_CASE("multiband static compression law") {
    MultibandParams mb = neutral_params().multiband;
    mb.xover_low = 100.0;
    mb.xover_high = 10000.0;
    mb.bands[1].threshold = -20.0;
    mb.bands[1].ratio = 4.0;
    // Per-sample detection: the closed-form curve holds when the attack
    // settles within a peak and the release barely moves between peaks.
    mb.bands[1].attack = 0.1;
    mb.bands[1].release = 1000.0;
    const StereoBuffer x = test::sine(2 * kSampleRate, 1000.0, std::pow(10.0, -8.0 / 20.0));
    const StereoBuffer y = apply_multiband_compressor(x, mb);
    CHECK(peak_db(y.left, kSampleRate) == Approx(-17.0).margin(0.5));
}

TEST_CASE("attack time scales the gain trajectory") {
    // Constant-amplitude (DC) step so the per-sample gain is y / x.
    auto time_to_90 = [](double attack_ms) {
        const std::size_t n = kSampleRate;
        std::vector<double> v(n, std::pow(10.0, -40.0 / 20.0));
        for (std::size_t i = n / 4; i < n; ++i) v[i] = std::pow(10.0, -5.0 / 20.0);
        ChainParams p = with_limiter(-20.0, 4.0, attack_ms, 1000.0);
        const StereoBuffer y = apply_limiter(StereoBuffer(v, v), p.limiter);
        const double final_db = 20.0 * std::log10(y.left[n - 1] / v[n - 1]);
        for (std::size_t i = n / 4; i < n; ++i) {
            const double g = 20.0 * std::log10(y.left[i] / v[i]);
            if (g <= 0.9 * final_db) return static_cast<double>(i - n / 4);
        }
        return static_cast<double>(n);
    };
    const double fast = time_to_90(1.0);
    const double slow = time_to_90(100.0);
    CHECK(slow >= 10.0 * fast);
}

TEST_CASE("makeup gain and stereo imager") {
    const StereoBuffer x = test::white_noise(2048, 0.2, 9, 0.5);
    const StereoBuffer y = apply_makeup_gain(x, 20.0 * std::log10(2.0));
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.left[i] == Approx(2.0 * x.left[i]).epsilon(1e-12));
    const StereoBuffer lo = apply_makeup_gain(x, -24.0);
    CHECK(lo.left[5] == Approx(x.left[5] * std::pow(10.0, -1.2)).epsilon(1e-14));
    CHECK(kind_of([&] { apply_makeup_gain(x, 24.5); }) == ErrorKind::range);

    const StereoBuffer mono = apply_stereo_imager(x, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(mono.left[i] == mono.right[i]);
        CHECK(mono.left[i] == Approx((x.left[i] + x.right[i]) / 2.0).epsilon(1e-14));
    }
    auto side_energy = [](const StereoBuffer& b) {
        double e = 0.0;
        for (std::size_t i = 0; i < b.size(); ++i) e += (b.left[i] - b.right[i]) * (b.left[i] - b.right[i]);
        return e;
    };
    CHECK(side_energy(apply_stereo_imager(x, 2.0)) == Approx(4.0 * side_energy(x)).epsilon(1e-12));
    CHECK(kind_of([&] { apply_stereo_imager(x, 2.1); }) == ErrorKind::range);
}

TEST_CASE("limiter static law") {
    const StereoBuffer x = test::sine(2 * kSampleRate, 1000.0, 1.0);
    const StereoBuffer y = apply_limiter(x, with_limiter(-6.0, 20.0).limiter);
    CHECK(peak_db(y.left, kSampleRate) == Approx(-5.7).margin(0.5));
    LimiterParams bad = neutral_params().limiter;
    bad.exp_threshold = -20.0;
    bad.comp_threshold = -25.0;
    CHECK(kind_of([&] { apply_limiter(x, bad); }) == ErrorKind::range);
}

TEST_CASE("static curve") {
    CHECK(static_gain_db(-8.0, -20.0, 4.0, -60.0, 1.0) == Approx(-9.0));
    CHECK(static_gain_db(-40.0, -20.0, 4.0, -30.0, 0.5) == Approx(-10.0));
    CHECK(static_gain_db(-25.0, -20.0, 4.0, -30.0, 0.5) == 0.0);
    // No level inversion above threshold.
    double prev = -1e9;
    for (double level = -19.9; level <= 0.0; level += 0.1) {
        const double out = level + static_gain_db(level, -20.0, 8.0, -50.0, 0.5);
        CHECK(out >= prev);
        prev = out;
    }
}

TEST_CASE("downward expansion restores dynamics") {
    const std::size_t n = kSampleRate;
    std::vector<double> v(2 * n);
    for (std::size_t i = 0; i < 2 * n; ++i) {
        const double amp = i < n ? std::pow(10.0, -40.0 / 20.0) : std::pow(10.0, -10.0 / 20.0);
        v[i] = amp * std::sin(2.0 * std::numbers::pi * 1000.0 * static_cast<double>(i) / kSampleRate);
    }
    const StereoBuffer x(v, v);
    LimiterParams lim = neutral_params().limiter;
    lim.exp_threshold = -30.0;
    lim.exp_ratio = 0.5;
    lim.attack = 100.0;
    lim.release = 10.0;
    const StereoBuffer y = apply_limiter(x, lim);
    const double quiet = test::rms_db(y.left, n / 2, n) - test::rms_db(x.left, n / 2, n);
    const double loud = test::rms_db(y.left, n + n / 2, 2 * n) - test::rms_db(x.left, n + n / 2, 2 * n);
    CHECK(quiet == Approx(-10.0).margin(2.0));
    CHECK(std::abs(loud) < 0.5);
    auto crest = [](const std::vector<double>& c) { return test::peak_db(c) - test::rms_db(c); };
    CHECK(crest(y.left) > crest(x.left));
}

TEST_CASE("dynamics are stereo-linked") {
    const StereoBuffer x = test::white_noise(kSampleRate / 2, 0.3, 12, 0.2);
    const StereoBuffer y = apply_limiter(x, with_limiter(-20.0, 8.0, 0.5, 50.0).limiter);
    for (std::size_t i = 0; i < x.size(); i += 97) {
        if (std::abs(x.left[i]) < 1e-3 || std::abs(x.right[i]) < 1e-3) continue;
        CHECK(y.left[i] / x.left[i] == Approx(y.right[i] / x.right[i]).epsilon(1e-12));
    }
}

TEST_CASE("chain order and smoke") {
    const StereoBuffer x = test::drum_loop(1.0, 5);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const StyleSample s = sample_style(seed);
        const StereoBuffer y = apply_chain(x, s.params, ModuleMask::all_on());
        CHECK(y.size() == x.size());
        CHECK_NOTHROW(y.validate());
        CHECK(y != x);
    }
    // EQ then makeup equals the two applied by hand.
    ChainParams p = neutral_params();
    p.eq.bands[3].gain = 5.0;
    p.makeup_gain = -3.0;
    ModuleMask m = ModuleMask::all_off();
    m[Module::equalizer] = true;
    m[Module::makeup_gain] = true;
    CHECK(apply_chain(x, p, m) == apply_makeup_gain(apply_equalizer(x, p.eq), -3.0));
}

TEST_CASE("reparameterization") {
    const auto& schema = param_schema();
    const ParamSpec& gain = schema[1];  // eq band 1 gain, [-12, 12]
    CHECK(to_physical(gain, 0.0) == 0.0);
    for (const auto& s : schema) {
        CHECK(std::abs(to_physical(s, 20.0) - s.max) <= 1e-8 * (s.max - s.min));
        CHECK(std::abs(to_physical(s, -20.0) - s.min) <= 1e-8 * (s.max - s.min));
        for (double u : {-1.7, -0.2, 0.9, 1.9}) {
            const double v = to_physical(s, u);
            CHECK(to_physical(s, to_unconstrained(s, v)) == Approx(v).epsilon(1e-6));
            const double h = 1e-6;
            const double fd = (to_physical(s, u + h) - to_physical(s, u - h)) / (2 * h);
            CHECK(to_physical_derivative(s, u) == Approx(fd).epsilon(1e-6));
        }
    }
    const ChainParams p = sample_style(21).params;
    const ChainParams q = unconstrained_to_params(params_to_unconstrained(p));
    const auto a = p.to_vector();
    const auto b = q.to_vector();
    for (std::size_t i = 0; i < kNumParams; ++i) CHECK(b[i] == Approx(a[i]).epsilon(1e-6));
    // Endpoints map to the clamp.
    CHECK(std::abs(to_unconstrained(schema[19], 0.0)) == kUnconstrainedLimit);
}

TEST_CASE("parameter validation and JSON") {
    ChainParams p = neutral_params();
    p.multiband.xover_low = 900.0;
    p.multiband.xover_high = 900.0;
    CHECK_FALSE(is_valid(p));
    p = neutral_params();
    p.width = -0.1;
    CHECK(kind_of([&] { validate(p); }) == ErrorKind::range);

    const ChainParams s = sample_style(33).params;
    CHECK(chain_params_from_json(to_json(s)) == s);
    nlohmann::json partial = {{"schema_version", 1}, {"params", {{"makeup_gain", {{"gain", 3.5}}}}}};
    ChainParams expect = neutral_params();
    expect.makeup_gain = 3.5;
    CHECK(chain_params_from_json(partial) == expect);
    nlohmann::json unknown = {{"schema_version", 1}, {"params", {{"makeup_gain", {{"bogus", 1.0}}}}}};
    CHECK(kind_of([&] { chain_params_from_json(unknown); }) == ErrorKind::format);
    nlohmann::json extra = {{"schema_version", 1}, {"params", nlohmann::json::object()}, {"x", 1}};
    CHECK(kind_of([&] { chain_params_from_json(extra); }) == ErrorKind::format);
    nlohmann::json out_of_range = {{"schema_version", 1}, {"params", {{"stereo_imager", {{"width", 3.0}}}}}};
    CHECK(kind_of([&] { chain_params_from_json(out_of_range); }) == ErrorKind::range);

    const ModuleMask m = sample_style(5).mask;
    CHECK(module_mask_from_json(to_json(m)) == m);
}
