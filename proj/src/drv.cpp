#include <algorithm>
#include <cmath>
#include <complex>

#include "fxfit/analysis.hpp"
#include "fxfit/error.hpp"
#include "fxfit/stft.hpp"

namespace fxfit {

namespace {

constexpr std::size_t kOnsetFft = 2048;
constexpr std::size_t kOnsetHop = 512;
constexpr double kMadFactor = 1.0;
constexpr double kPeakWindowSeconds = 0.05;
constexpr std::size_t kMinPeaks = 4;

double median(std::vector<double> v) {
    const std::size_t n = v.size();
    std::sort(v.begin(), v.end());
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Linear interpolation between closest ranks, rank = q (n - 1).
double percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double rank = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (rank - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

double drv_from_peaks(std::span<const double> peaks_db) {
    if (peaks_db.size() < kMinPeaks) return 0.0;
    std::vector<double> p(peaks_db.begin(), peaks_db.end());
    const double cut = percentile(p, 0.75);
    std::vector<double> kept;
    for (double v : p) {
        if (v > cut) kept.push_back(v);
    }
    if (kept.empty()) return 0.0;
    double mean = 0.0;
    for (double v : kept) mean += v;
    mean /= static_cast<double>(kept.size());
    double var = 0.0;
    for (double v : kept) var += (v - mean) * (v - mean);
    return std::sqrt(var / static_cast<double>(kept.size()));
}

std::vector<double> onset_peaks_db(std::span<const double> x) {
    Stft stft(kOnsetFft, kOnsetHop);
    std::vector<std::complex<double>> spec;
    stft.forward(x, spec);
    const std::size_t bins = stft.bins();
    const std::size_t frames = spec.size() / bins;
    std::vector<double> hfc(frames, 0.0);
    for (std::size_t t = 0; t < frames; ++t) {
        double acc = 0.0;
        for (std::size_t k = 0; k < bins; ++k) acc += static_cast<double>(k) * std::abs(spec[t * bins + k]);
        hfc[t] = acc;
    }
    if (frames < 3) return {};
    const double med = median(hfc);
    std::vector<double> dev(frames);
    for (std::size_t t = 0; t < frames; ++t) dev[t] = std::abs(hfc[t] - med);
    const double threshold = med + kMadFactor * median(dev);

    const auto half = static_cast<std::size_t>(std::lround(kPeakWindowSeconds * kSampleRate / 2.0));
    std::vector<double> peaks;
    for (std::size_t t = 1; t + 1 < frames; ++t) {
        if (!(hfc[t] > hfc[t - 1] && hfc[t] >= hfc[t + 1] && hfc[t] > threshold)) continue;
        const std::size_t center = t * kOnsetHop + kOnsetFft / 2;
        const std::size_t lo = center > half ? center - half : 0;
        const std::size_t hi = std::min(x.size(), center + half + 1);
        double peak = 0.0;
        for (std::size_t i = lo; i < hi; ++i) peak = std::max(peak, std::abs(x[i]));
        peaks.push_back(20.0 * std::log10(std::max(peak, 1e-10)));
    }
    return peaks;
}

double drv(const StereoBuffer& x) {
    x.validate();
    require(x.size() >= static_cast<std::size_t>(kSampleRate), ErrorKind::shape, "DRV needs at least 1 s of audio");
    return 0.5 * (drv_from_peaks(onset_peaks_db(x.left)) + drv_from_peaks(onset_peaks_db(x.right)));
}

}  // namespace fxfit
