#pragma once

#include <array>
#include <memory>

#include "fxfit/audio.hpp"
#include "fxfit/params.hpp"

namespace fxfit {

StereoBuffer apply_equalizer(const StereoBuffer& x, const EqParams& eq);

/// y = mix * tanh(g x) / tanh(g) + (1 - mix) x with g = 10^(drive/20).
StereoBuffer apply_distortion(const StereoBuffer& x, double drive, double mix);

struct BandSplit {
    StereoBuffer low;
    StereoBuffer mid;
    StereoBuffer high;
};

/// Linkwitz-Riley 4th-order three-way split. The low band also passes the
/// high crossover's allpass so low + mid + high is allpass.
/// pre: 40 <= xover_low < xover_high <= 12000.
BandSplit split_bands(const StereoBuffer& x, double xover_low, double xover_high);

StereoBuffer apply_multiband_compressor(const StereoBuffer& x, const MultibandParams& mb);

/// pre: |gain| <= 24 dB.
StereoBuffer apply_makeup_gain(const StereoBuffer& x, double gain_db);

/// L' = (m + width s) / 2, R' = (m - width s) / 2.
StereoBuffer apply_stereo_imager(const StereoBuffer& x, double width);

StereoBuffer apply_limiter(const StereoBuffer& x, const LimiterParams& lim);

/// EQ -> distortion -> multiband comp -> makeup gain -> stereo imager ->
/// limiter, skipping masked-off modules.
StereoBuffer apply_chain(const StereoBuffer& x, const ChainParams& params, const ModuleMask& mask);

/// Static gain curve of the compressor/expander in dB (<= 0).
double static_gain_db(double level_db, double comp_threshold, double comp_ratio, double exp_threshold,
                      double exp_ratio);

/// Forward pass of the chain that keeps what the reverse pass needs.
class ChainRecording {
  public:
    ChainRecording(const StereoBuffer& x, const ChainParams& params, const ModuleMask& mask);
    ~ChainRecording();
    ChainRecording(ChainRecording&&) noexcept;
    ChainRecording& operator=(ChainRecording&&) noexcept;

    const StereoBuffer& output() const;

    /// dL/dtheta in physical units given dL/doutput. Entries of masked-off
    /// modules are exactly zero.
    std::array<double, kNumParams> backward(const StereoBuffer& output_grad) const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace fxfit
