#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace fxfit {

inline constexpr int kSampleRate = 44100;

/// Two-channel audio at the engine rate. Samples are linear amplitude held in
/// double precision; WAV output is float32.
struct StereoBuffer {
    std::vector<double> left;
    std::vector<double> right;
    int sample_rate = kSampleRate;

    StereoBuffer() = default;
    explicit StereoBuffer(std::size_t frames) : left(frames, 0.0), right(frames, 0.0) {}
    StereoBuffer(std::vector<double> l, std::vector<double> r)
        : left(std::move(l)), right(std::move(r)) {}

    std::size_t size() const noexcept { return left.size(); }
    bool empty() const noexcept { return left.empty(); }
    double seconds() const noexcept { return static_cast<double>(size()) / sample_rate; }

    std::span<double> channel(int c) noexcept { return c == 0 ? left : right; }
    std::span<const double> channel(int c) const noexcept { return c == 0 ? left : right; }

    /// Throws on empty buffers, mismatched channel lengths or non-finite samples.
    void validate() const;

    bool operator==(const StereoBuffer&) const = default;
};

/// mid = L + R, side = L - R (no 1/2 factor).
struct MidSideBuffer {
    std::vector<double> mid;
    std::vector<double> side;
    int sample_rate = kSampleRate;
};

MidSideBuffer to_mid_side(const StereoBuffer& buf);
StereoBuffer from_mid_side(const MidSideBuffer& ms);

/// Reads RIFF/WAVE (PCM16, PCM24, float32; mono or stereo; any rate).
/// Mono is duplicated, integer PCM is scaled to [-1, 1) and the result is
/// resampled to 44100 Hz.
StereoBuffer load_audio(const std::filesystem::path& path);

/// Writes a 2-channel IEEE float32 WAV at 44100 Hz. Samples are not clipped.
void save_audio(const StereoBuffer& buf, const std::filesystem::path& path);

/// Kaiser-windowed sinc resampler, 64 taps per output sample.
std::vector<double> resample(std::span<const double> input, int from_rate, int to_rate);

}  // namespace fxfit
