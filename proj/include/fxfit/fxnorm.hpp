#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fxfit/audio.hpp"

namespace fxfit {

inline constexpr std::size_t kNumThirdOctaveBands = 31;

/// Nominal-base-ten third-octave centers, 1000 * 10^(k/10) for k = -17..13
/// (about 20 Hz to 20 kHz).
const std::array<double, kNumThirdOctaveBands>& third_octave_centers();

/// Per-track quantities matched by normalization.
struct TrackMeasurement {
    /// Mean per-bin power of the mid signal in each band, in dB relative to
    /// the average over bands (so independent of overall gain).
    std::array<double, kNumThirdOctaveBands> band_db{};
    double width = 0.0;  // E_side / E_mid
    double lufs = 0.0;
};

inline constexpr double kFxNormMinSeconds = 5.0;
inline constexpr double kEqMatchLimitDb = 12.0;
/// Bound on the designed FIR curve, which may overshoot the band-gain limit.
inline constexpr double kEqMatchDesignLimitDb = 24.0;
inline constexpr std::size_t kEqMatchTaps = 8192;

std::array<double, kNumThirdOctaveBands> band_levels_db(const StereoBuffer& x);
double stereo_width(const StereoBuffer& x);
TrackMeasurement measure_track(const StereoBuffer& x);

struct FxNormStats {
    std::array<double, kNumThirdOctaveBands> band_db{};
    double width = 0.0;
    double lufs = 0.0;
    std::size_t corpus_size = 0;
};

/// Arithmetic means over the non-silent tracks. Silent tracks are skipped and
/// reported in `warnings` when given. Throws empty_input when nothing is left.
FxNormStats compute_corpus_stats(std::span<const StereoBuffer> corpus, std::vector<std::string>* warnings = nullptr);

/// Linear-phase FIR (8192 taps, centred on tap 4096) realising a per-band
/// gain curve in dB, constant across each band.
std::vector<double> design_band_fir(std::span<const double, kNumThirdOctaveBands> gains_db);

/// Zero-latency application of a linear-phase FIR of even length `h.size()`
/// centred on h.size() / 2.
std::vector<double> apply_linear_phase_fir(std::span<const double> x, std::span<const double> h);

/// EQ match, then width match, then loudness match.
StereoBuffer normalize_track(const StereoBuffer& x, const FxNormStats& stats);

nlohmann::json to_json(const FxNormStats& stats);
FxNormStats fxnorm_stats_from_json(const nlohmann::json& j);

}  // namespace fxfit
