#include "fxfit/fxnorm.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include <nlohmann/json.hpp>

#include "fxfit/analysis.hpp"
#include "fxfit/error.hpp"
#include "fxfit/fx.hpp"
#include "fxfit/stft.hpp"

namespace fxfit {

namespace {

constexpr std::size_t kBandFft = 16384;
constexpr std::size_t kBandHop = 4096;
constexpr double kWidthEps = 1e-10;
constexpr double kPowerFloor = 1e-20;
constexpr int kEqMatchIterations = 8;

void check_track(const StereoBuffer& x) {
    x.validate();
    require(x.seconds() >= kFxNormMinSeconds, ErrorKind::shape, "Fx-normalization needs at least 5 s of audio");
}

// Gain of the band containing f; bands meet at geometric midpoints.
double band_gain(std::span<const double, kNumThirdOctaveBands> gains, double f) {
    const auto& c = third_octave_centers();
    const double edge = std::pow(2.0, 1.0 / 6.0);
    for (std::size_t b = 0; b + 1 < c.size(); ++b)
        if (f < c[b] * edge) return gains[b];
    return gains.back();
}

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Mean per-bin power of the mid signal on a kBandFft grid.
std::vector<double> mid_power_spectrum(const StereoBuffer& x) {
    std::vector<double> mid(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) mid[i] = x.left[i] + x.right[i];
    Stft stft(kBandFft, kBandHop);
    std::vector<std::complex<double>> spec;
    stft.forward(mid, spec);
    const std::size_t bins = stft.bins();
    const std::size_t frames = spec.size() / bins;
    std::vector<double> power(bins, 0.0);
    for (std::size_t t = 0; t < frames; ++t)
        for (std::size_t k = 0; k < bins; ++k) power[k] += std::norm(spec[t * bins + k]);
    for (double& p : power) p /= static_cast<double>(frames);
    return power;
}

std::array<double, kNumThirdOctaveBands> bands_from_power(const std::vector<double>& power, int sample_rate) {
    const std::size_t bins = power.size();
    const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(kBandFft);
    const double edge = std::pow(2.0, 1.0 / 6.0);
    std::array<double, kNumThirdOctaveBands> out{};
    double mean = 0.0;
    for (std::size_t b = 0; b < out.size(); ++b) {
        const double fc = third_octave_centers()[b];
        auto lo = static_cast<std::size_t>(std::ceil(fc / edge / bin_hz));
        auto hi = static_cast<std::size_t>(std::ceil(fc * edge / bin_hz));
        hi = std::min(hi, bins);
        if (lo >= hi) {
            lo = std::min(static_cast<std::size_t>(std::lround(fc / bin_hz)), bins - 1);
            hi = lo + 1;
        }
        double p = 0.0;
        for (std::size_t k = lo; k < hi; ++k) p += power[k];
        p /= static_cast<double>(hi - lo);
        out[b] = 10.0 * std::log10(p + kPowerFloor);
        mean += out[b];
    }
    mean /= static_cast<double>(out.size());
    for (double& v : out) v -= mean;
    return out;
}

// |H|^2 of an FIR on the kBandFft grid.
std::vector<double> fir_power_response(std::span<const double> h) {
    RealFft fft(kBandFft);
    std::vector<double> padded(kBandFft, 0.0);
    std::copy(h.begin(), h.end(), padded.begin());
    std::vector<std::complex<double>> spec(kBandFft / 2 + 1);
    fft.forward(padded, spec);
    std::vector<double> out(spec.size());
    for (std::size_t k = 0; k < spec.size(); ++k) out[k] = std::norm(spec[k]);
    return out;
}

}  // namespace

const std::array<double, kNumThirdOctaveBands>& third_octave_centers() {
    static const auto centers = [] {
        std::array<double, kNumThirdOctaveBands> c{};
        for (std::size_t i = 0; i < c.size(); ++i) c[i] = 1000.0 * std::pow(10.0, (static_cast<double>(i) - 17.0) / 10.0);
        return c;
    }();
    return centers;
}

std::array<double, kNumThirdOctaveBands> band_levels_db(const StereoBuffer& x) {
    return bands_from_power(mid_power_spectrum(x), x.sample_rate);
}

double stereo_width(const StereoBuffer& x) {
    double em = 0.0, es = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double m = x.left[i] + x.right[i];
        const double s = x.left[i] - x.right[i];
        em += m * m;
        es += s * s;
    }
    return es / (em + kWidthEps);
}

TrackMeasurement measure_track(const StereoBuffer& x) {
    check_track(x);
    return {band_levels_db(x), stereo_width(x), integrated_loudness(x)};
}

FxNormStats compute_corpus_stats(std::span<const StereoBuffer> corpus, std::vector<std::string>* warnings) {
    require(!corpus.empty(), ErrorKind::empty_input, "corpus is empty");
    FxNormStats s;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const TrackMeasurement m = measure_track(corpus[i]);
        if (!std::isfinite(m.lufs)) {
            if (warnings) warnings->push_back("track " + std::to_string(i) + " is silent; skipped");
            continue;
        }
        for (std::size_t b = 0; b < s.band_db.size(); ++b) s.band_db[b] += m.band_db[b];
        s.width += m.width;
        s.lufs += m.lufs;
        ++s.corpus_size;
    }
    require(s.corpus_size > 0, ErrorKind::empty_input, "corpus has no non-silent tracks");
    const double n = static_cast<double>(s.corpus_size);
    for (double& v : s.band_db) v /= n;
    s.width /= n;
    s.lufs /= n;
    return s;
}

std::vector<double> design_band_fir(std::span<const double, kNumThirdOctaveBands> gains_db) {
    const std::size_t n = kEqMatchTaps;
    const std::size_t bins = n / 2 + 1;
    std::vector<std::complex<double>> response(bins);
    for (std::size_t k = 0; k < bins; ++k) {
        const double f = static_cast<double>(k) * kSampleRate / static_cast<double>(n);
        response[k] = std::pow(10.0, band_gain(gains_db, f) / 20.0);
    }
    RealFft fft(n);
    std::vector<double> zero_phase(n);
    fft.inverse(response, zero_phase);
    const auto window = hann_window(n);
    std::vector<double> h(n);
    for (std::size_t i = 0; i < n; ++i) h[i] = zero_phase[(i + n / 2) % n] / static_cast<double>(n) * window[i];
    return h;
}

std::vector<double> apply_linear_phase_fir(std::span<const double> x, std::span<const double> h) {
    const std::size_t delay = h.size() / 2;
    const std::size_t size = next_pow2(x.size() + h.size());
    RealFft fft(size);
    std::vector<double> buf(size, 0.0);
    std::vector<std::complex<double>> hx(size / 2 + 1), xx(size / 2 + 1);
    std::copy(h.begin(), h.end(), buf.begin());
    fft.forward(buf, hx);
    std::fill(buf.begin(), buf.end(), 0.0);
    std::copy(x.begin(), x.end(), buf.begin());
    fft.forward(buf, xx);
    for (std::size_t k = 0; k < xx.size(); ++k) xx[k] *= hx[k];
    fft.inverse(xx, buf);
    std::vector<double> y(x.size());
    const double norm = 1.0 / static_cast<double>(size);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = buf[i + delay] * norm;
    return y;
}

StereoBuffer normalize_track(const StereoBuffer& x, const FxNormStats& stats) {
    check_track(x);
    require(std::isfinite(integrated_loudness(x)), ErrorKind::empty_input, "cannot normalize a silent track");

    // Band gains are clamped to the limit; the designed curve may exceed it
    // where the FIR's finite resolution leaks energy across band edges. Band
    // means after filtering are predicted from the track's power spectrum and
    // the curve is refined until the prediction meets the clamped goal.
    const auto power = mid_power_spectrum(x);
    const auto bands = bands_from_power(power, x.sample_rate);
    std::array<double, kNumThirdOctaveBands> curve{}, goal{};
    for (std::size_t b = 0; b < curve.size(); ++b) {
        curve[b] = std::clamp(stats.band_db[b] - bands[b], -kEqMatchLimitDb, kEqMatchLimitDb);
        goal[b] = bands[b] + curve[b];
    }
    auto h = design_band_fir(curve);
    std::vector<double> filtered(power.size());
    for (int iter = 0; iter < kEqMatchIterations; ++iter) {
        const auto response = fir_power_response(h);
        for (std::size_t k = 0; k < power.size(); ++k) filtered[k] = power[k] * response[k];
        const auto predicted = bands_from_power(filtered, x.sample_rate);
        for (std::size_t b = 0; b < curve.size(); ++b)
            curve[b] = std::clamp(curve[b] + goal[b] - predicted[b], -kEqMatchDesignLimitDb, kEqMatchDesignLimitDb);
        h = design_band_fir(curve);
    }
    StereoBuffer y(apply_linear_phase_fir(x.left, h), apply_linear_phase_fir(x.right, h));

    const double width = std::clamp(std::sqrt(stats.width / std::max(stereo_width(y), kWidthEps)), 0.0, 2.0);
    y = apply_stereo_imager(y, width);

    const double lufs = integrated_loudness(y);
    require(std::isfinite(lufs), ErrorKind::empty_input, "track became silent during normalization");
    const double gain = std::pow(10.0, (stats.lufs - lufs) / 20.0);
    for (auto* ch : {&y.left, &y.right})
        for (double& v : *ch) v *= gain;
    return y;
}

nlohmann::json to_json(const FxNormStats& stats) {
    const auto& c = third_octave_centers();
    return {
        {"schema_version", 1},
        {"bands_hz", std::vector<double>(c.begin(), c.end())},
        {"band_db", std::vector<double>(stats.band_db.begin(), stats.band_db.end())},
        {"width", stats.width},
        {"lufs", stats.lufs},
        {"n", stats.corpus_size},
    };
}

FxNormStats fxnorm_stats_from_json(const nlohmann::json& j) {
    try {
        require(j.at("schema_version").get<int>() == 1, ErrorKind::format, "unsupported stats schema_version");
        const auto bands = j.at("band_db").get<std::vector<double>>();
        require(bands.size() == kNumThirdOctaveBands, ErrorKind::format, "stats must have 31 bands");
        FxNormStats s;
        std::copy(bands.begin(), bands.end(), s.band_db.begin());
        s.width = j.at("width").get<double>();
        s.lufs = j.at("lufs").get<double>();
        s.corpus_size = j.at("n").get<std::size_t>();
        require(s.corpus_size >= 1 && s.width >= 0.0 && std::isfinite(s.lufs), ErrorKind::format,
                "stats values out of range");
        for (double v : s.band_db) require(std::isfinite(v), ErrorKind::format, "stats band gains must be finite");
        return s;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::format, std::string("malformed stats: ") + e.what());
    }
}

}  // namespace fxfit
