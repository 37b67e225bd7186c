#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <utility>

#include <nlohmann/json_fwd.hpp>

#include "fxfit/audio.hpp"
#include "fxfit/fxnorm.hpp"
#include "fxfit/params.hpp"

namespace fxfit {

/// Probability that each module (chain order) is enabled in a random style.
inline constexpr std::array<double, kNumModules> kModuleProbabilities = {0.9, 0.3, 0.8, 0.85, 0.6, 1.0};
/// Random parameters are uniform in unconstrained space on [-2, 2].
inline constexpr double kStyleSpread = 2.0;
inline constexpr double kDefaultSegmentSeconds = 11.8;

/// Seeded generator with a portable mapping to [0, 1).
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    bool bernoulli(double p) { return uniform() < p; }
    /// Uniform integer in [0, n].
    std::uint64_t below_or_equal(std::uint64_t n);

  private:
    std::mt19937_64 engine_;
};

/// Independent stream derived from `seed` and a stream index.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct StyleSample {
    ChainParams params;
    ModuleMask mask;
    std::uint64_t seed = 0;

    bool operator==(const StyleSample&) const = default;
};

StyleSample sample_style(std::uint64_t seed);

nlohmann::json to_json(const StyleSample& s);
StyleSample style_sample_from_json(const nlohmann::json& j);

struct Segments {
    StereoBuffer a;
    StereoBuffer b;
    std::size_t a_offset = 0;
    std::size_t b_offset = 0;
};

/// Two non-overlapping segments of `seg_seconds` each, placed uniformly.
/// pre: song holds at least two segments.
Segments segment_song(const StereoBuffer& song, double seg_seconds, std::uint64_t seed);

struct TrainingPair {
    StereoBuffer x_in;   // f1(normalize(A))
    StereoBuffer x_ref;  // f2(B)
    StereoBuffer y;      // f2(A)
    StyleSample style_a;
    StyleSample style_b;
};

/// Renders a pair from given segments and styles.
TrainingPair render_training_pair(const StereoBuffer& a, const StereoBuffer& b, const FxNormStats& stats,
                                  const StyleSample& style_a, const StyleSample& style_b);

TrainingPair synthesize_training_pair(const StereoBuffer& song, const FxNormStats& stats, std::uint64_t seed,
                                      double seg_seconds = kDefaultSegmentSeconds);

}  // namespace fxfit
