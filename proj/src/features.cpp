#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "fxfit/analysis.hpp"
#include "fxfit/error.hpp"
#include "fxfit/stft.hpp"

namespace fxfit {

namespace {

constexpr double kEps = 1e-10;
constexpr double kCentroidFloor = 1e-12;  // Hz
constexpr double kPowerDb = 10.0 / std::numbers::ln10;
constexpr std::size_t kSpectrumFft = 4096;
constexpr std::size_t kSpectrumHop = 1024;
constexpr double kLowEdge = 500.0;
constexpr double kHighEdge = 2000.0;

using Coeffs = std::array<double, FeatureVector::kSize>;

// Features of one window. When `df` is given, accumulates
// sum_i df[i] * d feature_i / d samples into gl/gr.
FeatureVector analyse(std::span<const double> l, std::span<const double> r, const Coeffs* df,
                      std::span<double> gl, std::span<double> gr) {
    const std::size_t n = l.size();
    double el = 0.0, er = 0.0, em = 0.0, es = 0.0;
    double pl = 0.0, pr = 0.0;
    std::size_t il = 0, ir = 0;
    std::vector<double> mid(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = l[i], b = r[i];
        el += a * a;
        er += b * b;
        em += (a + b) * (a + b);
        es += (a - b) * (a - b);
        if (std::abs(a) > pl) {
            pl = std::abs(a);
            il = i;
        }
        if (std::abs(b) > pr) {
            pr = std::abs(b);
            ir = i;
        }
        mid[i] = a + b;
    }
    const double nn = static_cast<double>(n);
    FeatureVector f;
    f.rms_l = kPowerDb * std::log(el / nn + kEps);
    f.rms_r = kPowerDb * std::log(er / nn + kEps);
    f.crest_l = kPowerDb * std::log(pl * pl + kEps) - f.rms_l;
    f.crest_r = kPowerDb * std::log(pr * pr + kEps) - f.rms_r;
    f.stereo_width = es / (em + kEps);
    f.stereo_imbalance = (el - er) / (el + er + kEps);

    Stft stft(kSpectrumFft, kSpectrumHop);
    std::vector<std::complex<double>> spec;
    stft.forward(mid, spec);
    const std::size_t bins = stft.bins();
    const std::size_t frames = spec.size() / bins;
    const double inv_frames = 1.0 / static_cast<double>(frames);
    const double bin_hz = static_cast<double>(kSampleRate) / static_cast<double>(kSpectrumFft);
    std::vector<double> mean_mag(bins, 0.0), mean_pow(bins, 0.0);
    for (std::size_t t = 0; t < frames; ++t) {
        for (std::size_t k = 0; k < bins; ++k) {
            const double p = std::norm(spec[t * bins + k]);
            mean_pow[k] += p;
            mean_mag[k] += std::sqrt(p);
        }
    }
    double sum_m = 0.0, sum_fm = 0.0, p_low = 0.0, p_high = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
        mean_mag[k] *= inv_frames;
        mean_pow[k] *= inv_frames;
        const double hz = static_cast<double>(k) * bin_hz;
        sum_m += mean_mag[k];
        sum_fm += hz * mean_mag[k];
        if (hz < kLowEdge) p_low += mean_pow[k];
        if (hz > kHighEdge) p_high += mean_pow[k];
    }
    const double centroid_hz = sum_fm / (sum_m + kEps);
    f.spectral_centroid = std::log2(centroid_hz + kCentroidFloor);
    f.low_high_ratio = kPowerDb * (std::log(p_low + kEps) - std::log(p_high + kEps));

    if (!df) return f;
    const Coeffs& d = *df;
    // Channel energies feed rms (and crest through -rms).
    const double a_el = (d[0] - d[2]) * kPowerDb / (el / nn + kEps) / nn;
    const double a_er = (d[1] - d[3]) * kPowerDb / (er / nn + kEps) / nn;
    const double dm = em + kEps;
    const double di = el + er + kEps;
    const double w_es = d[4] / dm;
    const double w_em = -d[4] * es / (dm * dm);
    const double i_el = d[5] * (1.0 / di - (el - er) / (di * di));
    const double i_er = d[5] * (-1.0 / di - (el - er) / (di * di));
    for (std::size_t i = 0; i < n; ++i) {
        const double a = l[i], b = r[i];
        const double s = 2.0 * (a - b) * w_es;
        const double m = 2.0 * (a + b) * w_em;
        gl[i] += 2.0 * a * (a_el + i_el) + s + m;
        gr[i] += 2.0 * b * (a_er + i_er) - s + m;
    }
    if (pl > 0.0) gl[il] += d[2] * kPowerDb * 2.0 * pl / (pl * pl + kEps) * (l[il] > 0.0 ? 1.0 : -1.0);
    if (pr > 0.0) gr[ir] += d[3] * kPowerDb * 2.0 * pr / (pr * pr + kEps) * (r[ir] > 0.0 ? 1.0 : -1.0);

    // Spectral features through the mid STFT.
    const double c_cent = d[6] / ((centroid_hz + kCentroidFloor) * std::numbers::ln2) / (sum_m + kEps);
    const double c_low = d[7] * kPowerDb / (p_low + kEps);
    const double c_high = -d[7] * kPowerDb / (p_high + kEps);
    std::vector<double> d_mag(bins), d_pow(bins);
    for (std::size_t k = 0; k < bins; ++k) {
        const double hz = static_cast<double>(k) * bin_hz;
        d_mag[k] = c_cent * (hz - centroid_hz) * inv_frames;
        d_pow[k] = ((hz < kLowEdge ? c_low : 0.0) + (hz > kHighEdge ? c_high : 0.0)) * inv_frames;
    }
    for (std::size_t t = 0; t < frames; ++t) {
        for (std::size_t k = 0; k < bins; ++k) {
            auto& x = spec[t * bins + k];
            const double mag = std::abs(x);
            const double g = (mag > 0.0 ? d_mag[k] / mag : 0.0) + 2.0 * d_pow[k];
            x *= g;
        }
    }
    std::vector<double> g_mid(n, 0.0);
    stft.backward(spec, g_mid);
    for (std::size_t i = 0; i < n; ++i) {
        gl[i] += g_mid[i];
        gr[i] += g_mid[i];
    }
    return f;
}

std::vector<std::pair<std::size_t, std::size_t>> feature_windows(std::size_t n) {
    const auto w = static_cast<std::size_t>(std::lround(kFeatureWindowSeconds * kSampleRate));
    const std::size_t hop = w / 2;
    if (n <= w) return {{0, n}};
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t start = 0; start + w <= n; start += hop) out.emplace_back(start, w);
    return out;
}

void check_length(const StereoBuffer& x) {
    x.validate();
    require(x.size() >= kFeatureMinLength, ErrorKind::shape, "feature extraction needs at least 4096 samples");
}

// Averaged window features; with `df` (coefficients on the average), also
// accumulates the gradient.
FeatureVector average_features(const StereoBuffer& x, const Coeffs* df, StereoBuffer* grad) {
    check_length(x);
    const auto windows = feature_windows(x.size());
    const double k = 1.0 / static_cast<double>(windows.size());
    Coeffs scaled{};
    if (df) {
        for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] = (*df)[i] * k;
    }
    Coeffs acc{};
    for (const auto& [start, len] : windows) {
        std::span<const double> l(x.left.data() + start, len), r(x.right.data() + start, len);
        std::span<double> gl, gr;
        if (grad) {
            gl = {grad->left.data() + start, len};
            gr = {grad->right.data() + start, len};
        }
        const auto f = analyse(l, r, df ? &scaled : nullptr, gl, gr).to_array();
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += f[i];
    }
    for (double& v : acc) v *= k;
    return FeatureVector::from_array(acc);
}

double weighted_distance(const FeatureVector& a, const FeatureVector& b, const AFWeights& w) {
    const auto fa = a.to_array(), fb = b.to_array(), wv = w.per_feature();
    double loss = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) loss += wv[i] * (fa[i] - fb[i]) * (fa[i] - fb[i]);
    return loss;
}

}  // namespace

const std::array<std::string_view, FeatureVector::kSize>& FeatureVector::names() {
    static const std::array<std::string_view, kSize> n = {"rms_l",          "rms_r",
                                                          "crest_l",        "crest_r",
                                                          "stereo_width",   "stereo_imbalance",
                                                          "spectral_centroid", "low_high_ratio"};
    return n;
}

std::array<double, FeatureVector::kSize> FeatureVector::to_array() const {
    return {rms_l, rms_r, crest_l, crest_r, stereo_width, stereo_imbalance, spectral_centroid, low_high_ratio};
}

FeatureVector FeatureVector::from_array(const std::array<double, kSize>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7]};
}

std::array<double, FeatureVector::kSize> AFWeights::per_feature() const {
    return {rms, rms, crest, crest, width, imbalance, centroid, low_high_ratio};
}

void AFWeights::validate() const {
    bool any = false;
    for (double w : per_feature()) {
        require(std::isfinite(w) && w >= 0.0, ErrorKind::range, "AF weights must be finite and nonnegative");
        any = any || w > 0.0;
    }
    require(any, ErrorKind::range, "at least one AF weight must be positive");
}

FeatureVector feature_vector(const StereoBuffer& x) {
    check_length(x);
    return analyse(x.left, x.right, nullptr, {}, {});
}

FeatureVector windowed_features(const StereoBuffer& x) { return average_features(x, nullptr, nullptr); }

double af_loss(const StereoBuffer& a, const StereoBuffer& b, const AFWeights& w) {
    w.validate();
    return weighted_distance(windowed_features(a), windowed_features(b), w);
}

AfReference::AfReference(const StereoBuffer& target, const AFWeights& w)
    : target_(windowed_features(target)), weights_(w) {
    w.validate();
}

double AfReference::loss(const StereoBuffer& a) const {
    return weighted_distance(windowed_features(a), target_, weights_);
}

double AfReference::loss_and_gradient(const StereoBuffer& a, StereoBuffer& grad) const {
    require(grad.size() == a.size() && grad.right.size() == a.size(), ErrorKind::shape,
            "AF gradient buffer has the wrong length");
    const FeatureVector fa = windowed_features(a);
    const auto va = fa.to_array(), vt = target_.to_array(), wv = weights_.per_feature();
    Coeffs df{};
    for (std::size_t i = 0; i < df.size(); ++i) df[i] = 2.0 * wv[i] * (va[i] - vt[i]);
    average_features(a, &df, &grad);
    return weighted_distance(fa, target_, weights_);
}

}  // namespace fxfit
