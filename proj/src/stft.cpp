#include "fxfit/stft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <numbers>

#include "fxfit/error.hpp"

namespace fxfit {

namespace {

struct Plans {
    fftw_plan forward;
    fftw_plan inverse;
};

// FFTW's planner is not thread-safe; executing an existing plan on new arrays
// is. Plans are created once per size with FFTW_ESTIMATE so every run picks
// the same algorithm, and FFTW_UNALIGNED so they run on caller buffers.
const Plans& plans_for(std::size_t n) {
    static std::mutex mutex;
    static std::map<std::size_t, Plans> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    double* in = fftw_alloc_real(n);
    fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
    Plans p{};
    p.forward = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE | FFTW_UNALIGNED);
    p.inverse = fftw_plan_dft_c2r_1d(static_cast<int>(n), out, in, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(in);
    fftw_free(out);
    return cache.emplace(n, p).first->second;
}

}  // namespace

struct RealFft::Impl {
    const Plans* plans = nullptr;
    double* real = nullptr;
    fftw_complex* cplx = nullptr;

    ~Impl() {
        fftw_free(real);
        fftw_free(cplx);
    }
};

RealFft::RealFft(std::size_t size) : size_(size), impl_(std::make_unique<Impl>()) {
    require(size >= 2 && (size & (size - 1)) == 0, ErrorKind::precondition,
            "FFT size must be a power of two");
    impl_->plans = &plans_for(size);
    impl_->real = fftw_alloc_real(size);
    impl_->cplx = fftw_alloc_complex(size / 2 + 1);
}

RealFft::~RealFft() = default;
RealFft::RealFft(RealFft&&) noexcept = default;
RealFft& RealFft::operator=(RealFft&&) noexcept = default;

void RealFft::forward(std::span<const double> in, std::span<std::complex<double>> out) {
    require(in.size() >= size_ && out.size() >= bins(), ErrorKind::shape, "FFT buffer too small");
    // Out-of-place r2c leaves the input untouched.
    fftw_execute_dft_r2c(impl_->plans->forward, const_cast<double*>(in.data()),
                         reinterpret_cast<fftw_complex*>(out.data()));
}

void RealFft::inverse(std::span<const std::complex<double>> in, std::span<double> out) {
    require(in.size() >= bins() && out.size() >= size_, ErrorKind::shape, "FFT buffer too small");
    // c2r destroys its input, so it runs on a private copy.
    std::memcpy(impl_->cplx, in.data(), bins() * sizeof(fftw_complex));
    fftw_execute_dft_c2r(impl_->plans->inverse, impl_->cplx, out.data());
}

std::vector<double> hann_window(std::size_t size) {
    std::vector<double> w(size);
    for (std::size_t n = 0; n < size; ++n)
        w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(size));
    return w;
}

std::size_t stft_frame_count(std::size_t length, std::size_t fft_size, std::size_t hop) {
    if (length < fft_size) return 1;
    return (length - fft_size) / hop + 1;
}

Stft::Stft(std::size_t fft_size, std::size_t hop)
    : fft_size_(fft_size), hop_(hop), window_(hann_window(fft_size)), fft_(fft_size),
      frame_(fft_size), bins_(fft_size / 2 + 1) {
    require(hop > 0 && hop <= fft_size, ErrorKind::precondition, "STFT hop must be in (0, fft_size]");
    double energy = 0.0;
    for (double w : window_) energy += w * w;
    scale_ = 1.0 / std::sqrt(energy);
    scaled_window_.resize(fft_size);
    for (std::size_t n = 0; n < fft_size; ++n) scaled_window_[n] = scale_ * window_[n];
}

void Stft::forward(std::span<const double> signal, std::vector<std::complex<double>>& spec) {
    const std::size_t n_frames = frames(signal.size());
    const std::size_t n_bins = bins();
    spec.resize(n_frames * n_bins);
    for (std::size_t t = 0; t < n_frames; ++t) {
        const std::size_t start = t * hop_;
        const std::size_t avail = start < signal.size() ? std::min(fft_size_, signal.size() - start) : 0;
        for (std::size_t n = 0; n < avail; ++n) frame_[n] = signal[start + n] * scaled_window_[n];
        for (std::size_t n = avail; n < fft_size_; ++n) frame_[n] = 0.0;
        fft_.forward(frame_, std::span<std::complex<double>>(spec.data() + t * n_bins, n_bins));
    }
}

void Stft::backward(std::span<const std::complex<double>> spec_grad, std::span<double> signal_grad) {
    const std::size_t n_frames = frames(signal_grad.size());
    const std::size_t n_bins = bins();
    require(spec_grad.size() == n_frames * n_bins, ErrorKind::shape, "STFT gradient shape mismatch");
    for (std::size_t t = 0; t < n_frames; ++t) {
        const auto* g = spec_grad.data() + t * n_bins;
        bins_[0] = {g[0].real(), 0.0};
        for (std::size_t k = 1; k + 1 < n_bins; ++k) bins_[k] = 0.5 * g[k];
        bins_[n_bins - 1] = {g[n_bins - 1].real(), 0.0};
        fft_.inverse(bins_, frame_);
        const std::size_t start = t * hop_;
        const std::size_t avail = start < signal_grad.size() ? std::min(fft_size_, signal_grad.size() - start) : 0;
        for (std::size_t n = 0; n < avail; ++n) signal_grad[start + n] += scaled_window_[n] * frame_[n];
    }
}

SpectrogramMag stft_mag(std::span<const double> signal, std::size_t fft_size, std::size_t hop) {
    require(fft_size >= 256 && fft_size <= 16384 && (fft_size & (fft_size - 1)) == 0,
            ErrorKind::precondition, "fft_size must be a power of two in [256, 16384]");
    require(hop > 0 && hop <= fft_size, ErrorKind::precondition, "hop must be in (0, fft_size]");
    Stft stft(fft_size, hop);
    std::vector<std::complex<double>> spec;
    stft.forward(signal, spec);
    SpectrogramMag out;
    out.fft_size = fft_size;
    out.hop = hop;
    out.bins = stft.bins();
    out.frames = spec.size() / out.bins;
    out.mag.resize(spec.size());
    for (std::size_t i = 0; i < spec.size(); ++i) out.mag[i] = std::abs(spec[i]);
    return out;
}

SpectrogramMag stft_mag(std::span<const double> signal, std::size_t fft_size) {
    return stft_mag(signal, fft_size, fft_size / 4);
}

}  // namespace fxfit
