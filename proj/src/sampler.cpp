#include "fxfit/sampler.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "fxfit/error.hpp"
#include "fxfit/fx.hpp"

namespace fxfit {

namespace {

constexpr std::size_t kLimiterCompThreshold = 39;
constexpr std::size_t kLimiterExpThreshold = 41;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

StereoBuffer slice(const StereoBuffer& x, std::size_t offset, std::size_t length) {
    const auto first = static_cast<std::ptrdiff_t>(offset);
    const auto last = static_cast<std::ptrdiff_t>(offset + length);
    return StereoBuffer(std::vector<double>(x.left.begin() + first, x.left.begin() + last),
                        std::vector<double>(x.right.begin() + first, x.right.begin() + last));
}

}  // namespace

std::uint64_t Rng::below_or_equal(std::uint64_t n) {
    if (n == 0) return 0;
    const auto v = static_cast<std::uint64_t>(std::floor(uniform() * (static_cast<double>(n) + 1.0)));
    return std::min(v, n);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

StyleSample sample_style(std::uint64_t seed) {
    Rng rng(seed);
    StyleSample s;
    s.seed = seed;
    for (std::size_t m = 0; m < kNumModules; ++m) s.mask.enabled[m] = rng.bernoulli(kModuleProbabilities[m]);
    std::vector<double> u(kNumParams);
    for (double& v : u) v = rng.uniform(-kStyleSpread, kStyleSpread);
    // The limiter's expander must sit below its compressor.
    const auto& schema = param_schema();
    while (to_physical(schema[kLimiterExpThreshold], u[kLimiterExpThreshold]) >=
           to_physical(schema[kLimiterCompThreshold], u[kLimiterCompThreshold])) {
        u[kLimiterCompThreshold] = rng.uniform(-kStyleSpread, kStyleSpread);
        u[kLimiterExpThreshold] = rng.uniform(-kStyleSpread, kStyleSpread);
    }
    s.params = unconstrained_to_params(u);
    validate(s.params);
    return s;
}

nlohmann::json to_json(const StyleSample& s) {
    return {{"schema_version", 1}, {"seed", s.seed}, {"mask", to_json(s.mask)}, {"params", to_json(s.params)}};
}

StyleSample style_sample_from_json(const nlohmann::json& j) {
    try {
        require(j.at("schema_version").get<int>() == 1, ErrorKind::format, "unsupported style schema_version");
        StyleSample s;
        s.seed = j.at("seed").get<std::uint64_t>();
        s.mask = module_mask_from_json(j.at("mask"));
        s.params = chain_params_from_json(j.at("params"));
        return s;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::format, std::string("malformed style sample: ") + e.what());
    }
}

Segments segment_song(const StereoBuffer& song, double seg_seconds, std::uint64_t seed) {
    song.validate();
    require(seg_seconds > 0.0, ErrorKind::precondition, "segment length must be positive");
    const auto len = static_cast<std::size_t>(std::lround(seg_seconds * song.sample_rate));
    require(len >= 1 && song.size() >= 2 * len, ErrorKind::shape, "song is too short for two segments");
    Rng rng(seed);
    // Two ordered start points in the slack; the second segment follows the
    // first one's end.
    const std::size_t slack = song.size() - 2 * len;
    std::size_t p = rng.below_or_equal(slack);
    std::size_t q = rng.below_or_equal(slack);
    if (p > q) std::swap(p, q);
    std::size_t first = p;
    std::size_t second = q + len;
    if (rng.bernoulli(0.5)) std::swap(first, second);
    return {slice(song, first, len), slice(song, second, len), first, second};
}

TrainingPair render_training_pair(const StereoBuffer& a, const StereoBuffer& b, const FxNormStats& stats,
                                  const StyleSample& style_a, const StyleSample& style_b) {
    TrainingPair pair;
    pair.x_in = apply_chain(normalize_track(a, stats), style_a.params, style_a.mask);
    pair.x_ref = apply_chain(b, style_b.params, style_b.mask);
    pair.y = apply_chain(a, style_b.params, style_b.mask);
    pair.style_a = style_a;
    pair.style_b = style_b;
    return pair;
}

TrainingPair synthesize_training_pair(const StereoBuffer& song, const FxNormStats& stats, std::uint64_t seed,
                                      double seg_seconds) {
    const Segments seg = segment_song(song, seg_seconds, derive_seed(seed, 0));
    return render_training_pair(seg.a, seg.b, stats, sample_style(derive_seed(seed, 1)),
                                sample_style(derive_seed(seed, 2)));
}

}  // namespace fxfit
