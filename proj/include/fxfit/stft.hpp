#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace fxfit {

/// Real-input FFT of fixed size backed by FFTW. Instances own their scratch
/// buffers, so one instance must not be shared across threads.
class RealFft {
  public:
    explicit RealFft(std::size_t size);
    ~RealFft();
    RealFft(RealFft&&) noexcept;
    RealFft& operator=(RealFft&&) noexcept;
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    std::size_t size() const noexcept { return size_; }
    std::size_t bins() const noexcept { return size_ / 2 + 1; }

    void forward(std::span<const double> in, std::span<std::complex<double>> out);
    /// Unnormalized Hermitian inverse: out[n] = sum over the full spectrum.
    void inverse(std::span<const std::complex<double>> in, std::span<double> out);

  private:
    struct Impl;
    std::size_t size_;
    std::unique_ptr<Impl> impl_;
};

/// Periodic Hann window.
std::vector<double> hann_window(std::size_t size);

struct SpectrogramMag {
    std::size_t fft_size = 0;
    std::size_t hop = 0;
    std::size_t frames = 0;
    std::size_t bins = 0;
    std::vector<double> mag;  // frames x bins, row-major

    double at(std::size_t frame, std::size_t bin) const { return mag[frame * bins + bin]; }
};

/// Number of analysis frames for a signal of `length` samples:
/// floor((length - fft_size) / hop) + 1, or one zero-padded frame when the
/// signal is shorter than the FFT.
std::size_t stft_frame_count(std::size_t length, std::size_t fft_size, std::size_t hop);

/// Hann-windowed STFT with magnitudes scaled by 1/sqrt(sum w^2).
class Stft {
  public:
    Stft(std::size_t fft_size, std::size_t hop);

    std::size_t fft_size() const noexcept { return fft_size_; }
    std::size_t hop() const noexcept { return hop_; }
    std::size_t bins() const noexcept { return fft_size_ / 2 + 1; }
    double scale() const noexcept { return scale_; }
    const std::vector<double>& window() const noexcept { return window_; }

    std::size_t frames(std::size_t length) const { return stft_frame_count(length, fft_size_, hop_); }

    /// Complex spectra, frames x bins.
    void forward(std::span<const double> signal, std::vector<std::complex<double>>& spec);

    /// Accumulates dL/dsignal given dL/dRe + i dL/dIm for every spectrum entry.
    void backward(std::span<const std::complex<double>> spec_grad, std::span<double> signal_grad);

  private:
    std::size_t fft_size_;
    std::size_t hop_;
    double scale_;
    std::vector<double> window_;
    std::vector<double> scaled_window_;
    RealFft fft_;
    std::vector<double> frame_;
    std::vector<std::complex<double>> bins_;
};

/// pre: fft_size is a power of two in [256, 16384] and 0 < hop <= fft_size.
SpectrogramMag stft_mag(std::span<const double> signal, std::size_t fft_size, std::size_t hop);
SpectrogramMag stft_mag(std::span<const double> signal, std::size_t fft_size);

}  // namespace fxfit
