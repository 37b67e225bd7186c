#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include <nlohmann/json.hpp>

#include "fxfit/analysis.hpp"
#include "fxfit/error.hpp"
#include "fxfit/fx.hpp"
#include "fxfit/fxnorm.hpp"
#include "fxfit/sampler.hpp"
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

// 63 Hz .. 12.5 kHz
constexpr std::size_t kFirstInterior = 5;
constexpr std::size_t kLastInterior = 28;

// Stereo noise whose side/mid energy ratio is `width`.
StereoBuffer noise_with_width(double width, std::uint64_t seed) {
    const StereoBuffer base = test::pink_noise(6 * kSampleRate, 0.3, seed);
    MidSideBuffer ms = to_mid_side(base);
    const double em = std::inner_product(ms.mid.begin(), ms.mid.end(), ms.mid.begin(), 0.0);
    const double es = std::inner_product(ms.side.begin(), ms.side.end(), ms.side.begin(), 0.0);
    const double k = std::sqrt(width * em / es);
    for (double& v : ms.side) v *= k;
    return from_mid_side(ms);
}

double crest_db(const std::vector<double>& x) { return test::peak_db(x) - test::rms_db(x); }

}  // namespace

TEST_CASE("third-octave centres") {
    const auto& c = third_octave_centers();
    CHECK(c.front() == Approx(19.95).margin(0.01));
    CHECK(c[17] == 1000.0);
    CHECK(c.back() == Approx(19952.6).margin(0.1));
}

TEST_CASE("corpus statistics") {
    const StereoBuffer a = noise_with_width(0.2, 1);
    const StereoBuffer b = noise_with_width(0.4, 2);
    CHECK(stereo_width(a) == Approx(0.2).epsilon(1e-9));

    const std::vector<StereoBuffer> one = {a};
    const FxNormStats s1 = compute_corpus_stats(one);
    const TrackMeasurement m = measure_track(a);
    CHECK(s1.corpus_size == 1);
    CHECK(s1.width == m.width);
    CHECK(s1.lufs == m.lufs);
    CHECK(s1.band_db == m.band_db);

    const std::vector<StereoBuffer> two = {a, b};
    const FxNormStats s2 = compute_corpus_stats(two);
    CHECK(s2.width == Approx(0.3).epsilon(1e-9));
    CHECK(s2.lufs == Approx(0.5 * (measure_track(a).lufs + measure_track(b).lufs)).epsilon(1e-12));
}

TEST_CASE("pink corpus has a -3 dB per octave slope") {
    std::vector<StereoBuffer> corpus;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) corpus.push_back(test::pink_noise(6 * kSampleRate, 0.3, seed));
    const FxNormStats s = compute_corpus_stats(corpus);
    const auto& c = third_octave_centers();
    // Least-squares slope against log2 frequency.
    double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
    for (std::size_t k = kFirstInterior; k <= kLastInterior; ++k) {
        const double x = std::log2(c[k]);
        sx += x;
        sy += s.band_db[k];
        sxx += x * x;
        sxy += x * s.band_db[k];
        n += 1;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    CHECK(slope == Approx(-3.0).margin(0.5));
}

TEST_CASE("silent and empty corpora") {
    const StereoBuffer silence(std::vector<double>(6 * kSampleRate, 0.0), std::vector<double>(6 * kSampleRate, 0.0));
    const std::vector<StereoBuffer> mixed = {silence, noise_with_width(0.3, 4)};
    std::vector<std::string> warnings;
    const FxNormStats s = compute_corpus_stats(mixed, &warnings);
    CHECK(s.corpus_size == 1);
    CHECK(warnings.size() == 1);

    const std::vector<StereoBuffer> none;
    CHECK(kind_of([&] { compute_corpus_stats(none); }) == ErrorKind::empty_input);
    const std::vector<StereoBuffer> silent = {silence};
    CHECK(kind_of([&] { compute_corpus_stats(silent); }) == ErrorKind::empty_input);
    CHECK(kind_of([&] { normalize_track(silence, s); }) == ErrorKind::empty_input);
    CHECK(kind_of([&] { measure_track(test::pink_noise(4 * kSampleRate, 0.3, 1)); }) == ErrorKind::shape);
}

TEST_CASE("linear-phase FIR") {
    std::array<double, kNumThirdOctaveBands> flat{};
    const auto h = design_band_fir(flat);
    REQUIRE(h.size() == kEqMatchTaps);
    for (std::size_t n = 1; n < h.size() / 2; ++n) CHECK(h[h.size() / 2 - n] == Approx(h[h.size() / 2 + n]).margin(1e-12));
    CHECK(h[h.size() / 2] == Approx(1.0).margin(1e-9));

    const std::vector<double> x = test::sine_channel(8192, 1000.0, 0.5);
    const auto y = apply_linear_phase_fir(x, h);
    REQUIRE(y.size() == x.size());
    for (std::size_t n = 2048; n < 6000; ++n) CHECK(y[n] == Approx(x[n]).margin(1e-6));
}

TEST_CASE("normalization meets its targets") {
    std::vector<StereoBuffer> corpus;
    for (std::uint64_t seed = 1; seed <= 4; ++seed) corpus.push_back(test::synthetic_music(8.0, seed));
    const FxNormStats stats = compute_corpus_stats(corpus);

    for (std::uint64_t seed = 10; seed < 13; ++seed) {
        INFO("seed " << seed);
        const StyleSample style = sample_style(seed);
        ModuleMask mask = ModuleMask::all_off();
        mask[Module::equalizer] = true;
        mask[Module::stereo_imager] = true;
        const StereoBuffer x = apply_chain(test::synthetic_music(8.0, seed), style.params, mask);
        const StereoBuffer y = normalize_track(x, stats);
        const TrackMeasurement m = measure_track(y);
        CHECK(m.lufs == Approx(stats.lufs).margin(0.2));
        CHECK(m.width == Approx(stats.width).epsilon(0.05));
        for (std::size_t k = kFirstInterior; k <= kLastInterior; ++k) CHECK(std::abs(m.band_db[k] - stats.band_db[k]) < 1.0);

        const StereoBuffer z = normalize_track(y, stats);
        const TrackMeasurement mz = measure_track(z);
        CHECK(std::abs(mz.lufs - m.lufs) < 0.1);
        for (std::size_t k = kFirstInterior; k <= kLastInterior; ++k) CHECK(std::abs(mz.band_db[k] - m.band_db[k]) < 0.3);

        CHECK(normalize_track(x, stats) == y);
    }
}

TEST_CASE("normalizing a matching track is near identity") {
    const StereoBuffer x = test::synthetic_music(8.0, 21);
    const std::vector<StereoBuffer> one = {x};
    const FxNormStats stats = compute_corpus_stats(one);
    const StereoBuffer y = normalize_track(x, stats);
    CHECK(std::abs(test::rms_db(y.left) - test::rms_db(x.left)) < 0.1);
    CHECK(std::abs(test::rms_db(y.right) - test::rms_db(x.right)) < 0.1);
    const TrackMeasurement mx = measure_track(x), my = measure_track(y);
    for (std::size_t k = kFirstInterior; k <= kLastInterior; ++k) CHECK(std::abs(mx.band_db[k] - my.band_db[k]) < 0.2);
}

TEST_CASE("normalization leaves dynamics alone") {
    // Level and width differ from the targets; the spectral shape already matches.
    const StereoBuffer loop = test::drum_loop(8.0, 3);
    LimiterParams lim = neutral_params().limiter;
    lim.comp_threshold = -18.0;
    lim.comp_ratio = 8.0;
    lim.attack = 0.5;
    lim.output_gain = -9.0;
    const StereoBuffer squashed = apply_limiter(loop, lim);
    FxNormStats stats = compute_corpus_stats(std::vector<StereoBuffer>{squashed});
    stats.lufs += 6.0;
    stats.width *= 0.6;
    const StereoBuffer y = normalize_track(squashed, stats);
    CHECK(std::abs(crest_db(y.left) - crest_db(squashed.left)) < 0.5);
    CHECK(std::abs(crest_db(y.right) - crest_db(squashed.right)) < 0.5);
    CHECK(std::abs(crest_db(squashed.left) - crest_db(loop.left)) > 1.0);
}

TEST_CASE("stats json") {
    const std::vector<StereoBuffer> corpus = {noise_with_width(0.25, 5)};
    const FxNormStats s = compute_corpus_stats(corpus);
    const nlohmann::json j = to_json(s);
    CHECK(j["schema_version"] == 1);
    CHECK(j["bands_hz"].size() == kNumThirdOctaveBands);
    const FxNormStats back = fxnorm_stats_from_json(j);
    CHECK(back.band_db == s.band_db);
    CHECK(back.width == s.width);
    CHECK(back.lufs == s.lufs);
    CHECK(back.corpus_size == 1);

    nlohmann::json bad = j;
    bad["band_db"].erase(0);
    CHECK(kind_of([&] { fxnorm_stats_from_json(bad); }) == ErrorKind::format);
    CHECK(kind_of([] { fxnorm_stats_from_json(nlohmann::json::parse("[1,2]")); }) == ErrorKind::format);
}
