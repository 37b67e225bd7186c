#pragma once

#include <array>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fxfit/audio.hpp"

namespace fxfit {

// ---------------------------------------------------------------------------
// Multi-scale spectral loss

inline constexpr std::array<std::size_t, 4> kMssSizes = {512, 1024, 2048, 4096};
inline constexpr double kMssEps = 1e-7;

/// Sum over views {L, R, L+R, L-R} and FFT sizes of the relative Frobenius
/// distance and the mean absolute log-magnitude distance.
double mss_loss(const StereoBuffer& a, const StereoBuffer& b);

/// Target spectra of one side of the MSS loss, computed once.
class MssReference {
  public:
    explicit MssReference(const StereoBuffer& target);

    std::size_t length() const noexcept { return length_; }
    double loss(const StereoBuffer& a) const;
    /// Also accumulates dL/da into `grad` (same length as `a`).
    double loss_and_gradient(const StereoBuffer& a, StereoBuffer& grad) const;

  private:
    struct Scale {
        std::size_t fft_size;
        std::vector<double> log_mag;  // log(|B| + eps)
        std::vector<double> mag;
        double norm;
    };
    double evaluate(const StereoBuffer& a, StereoBuffer* grad) const;

    std::size_t length_;
    std::array<std::vector<Scale>, 4> views_;  // L, R, M, S
};

// ---------------------------------------------------------------------------
// Audio features

struct FeatureVector {
    double rms_l = 0.0;  // dB
    double rms_r = 0.0;
    double crest_l = 0.0;  // dB
    double crest_r = 0.0;
    double stereo_width = 0.0;
    double stereo_imbalance = 0.0;
    double spectral_centroid = 0.0;  // log2(Hz)
    double low_high_ratio = 0.0;     // dB

    static constexpr std::size_t kSize = 8;
    static const std::array<std::string_view, kSize>& names();
    std::array<double, kSize> to_array() const;
    static FeatureVector from_array(const std::array<double, kSize>& a);
};

/// Loss weights. `rms` and `crest` apply to both channels.
struct AFWeights {
    double rms = 1.0;
    double crest = 0.5;
    double width = 1.0;
    double imbalance = 1.0;
    double centroid = 0.5;
    double low_high_ratio = 0.5;

    std::array<double, FeatureVector::kSize> per_feature() const;
    /// Nonnegative with at least one positive entry; throws otherwise.
    void validate() const;
};

inline constexpr std::size_t kFeatureMinLength = 4096;
inline constexpr double kFeatureWindowSeconds = 5.0;

/// Whole-clip features. pre: length >= 4096.
FeatureVector feature_vector(const StereoBuffer& x);
/// Features averaged over 5 s windows with 50% overlap (one window when the
/// clip is shorter).
FeatureVector windowed_features(const StereoBuffer& x);

double af_loss(const StereoBuffer& a, const StereoBuffer& b, const AFWeights& w = {});

class AfReference {
  public:
    AfReference(const StereoBuffer& target, const AFWeights& w = {});

    const FeatureVector& features() const noexcept { return target_; }
    double loss(const StereoBuffer& a) const;
    /// Also accumulates dL/da into `grad`.
    double loss_and_gradient(const StereoBuffer& a, StereoBuffer& grad) const;

  private:
    FeatureVector target_;
    AFWeights weights_;
};

// ---------------------------------------------------------------------------
// Dynamic range variability

/// Population std of the peaks above their 75th percentile (linear
/// interpolation). Fewer than four peaks yield 0.
double drv_from_peaks(std::span<const double> peaks_db);

/// Onset peak levels (dB) of one channel from an HFC detector on a
/// 2048/512 STFT.
std::vector<double> onset_peaks_db(std::span<const double> channel);

/// Mean over channels of drv_from_peaks(onset_peaks_db(channel)).
/// pre: length >= 1 s.
double drv(const StereoBuffer& x);

// ---------------------------------------------------------------------------
// Loudness

inline constexpr double kSilentLoudness = -std::numeric_limits<double>::infinity();

/// Gated integrated loudness (K-weighted, 400 ms blocks, 100 ms step,
/// -70 LUFS absolute and -10 LU relative gates). Returns kSilentLoudness when
/// every block is gated. pre: length >= 400 ms.
double integrated_loudness(const StereoBuffer& x);

/// Applies the two-stage K-weighting filter to one channel.
std::vector<double> k_weight(std::span<const double> x, int sample_rate);

// ---------------------------------------------------------------------------
// Reports

struct MetricsReport {
    double drv = 0.0;
    FeatureVector features;
    double integrated_loudness = 0.0;
    std::optional<double> af_vs_reference;
};

MetricsReport compute_metrics(const StereoBuffer& x, const StereoBuffer* reference = nullptr,
                              const AFWeights& w = {});

/// dB and LUFS values are rounded to four decimals; silent loudness is null.
nlohmann::json to_json(const MetricsReport& report);
nlohmann::json to_json(const FeatureVector& f);

}  // namespace fxfit
