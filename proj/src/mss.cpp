#include <cmath>
#include <complex>

#include "fxfit/analysis.hpp"
#include "fxfit/error.hpp"
#include "fxfit/stft.hpp"

namespace fxfit {

namespace {

using Spectrum = std::vector<std::complex<double>>;

// STFT is linear, so the mid and side spectra are sums of the channel spectra.
void view_spectra(Stft& stft, const StereoBuffer& x, std::array<Spectrum, 4>& specs) {
    stft.forward(x.left, specs[0]);
    stft.forward(x.right, specs[1]);
    const std::size_t n = specs[0].size();
    specs[2].resize(n);
    specs[3].resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        specs[2][i] = specs[0][i] + specs[1][i];
        specs[3][i] = specs[0][i] - specs[1][i];
    }
}

}  // namespace

MssReference::MssReference(const StereoBuffer& target) : length_(target.size()) {
    target.validate();
    std::array<Spectrum, 4> specs;
    for (std::size_t size : kMssSizes) {
        Stft stft(size, size / 4);
        view_spectra(stft, target, specs);
        for (std::size_t v = 0; v < specs.size(); ++v) {
            const Spectrum& spec = specs[v];
            Scale s{size, std::vector<double>(spec.size()), std::vector<double>(spec.size()), 0.0};
            double e = 0.0;
            for (std::size_t i = 0; i < spec.size(); ++i) {
                const double m = std::sqrt(std::norm(spec[i]));
                s.mag[i] = m;
                s.log_mag[i] = std::log(m + kMssEps);
                e += m * m;
            }
            s.norm = std::sqrt(e);
            views_[v].push_back(std::move(s));
        }
    }
}

double MssReference::loss(const StereoBuffer& a) const { return evaluate(a, nullptr); }

double MssReference::loss_and_gradient(const StereoBuffer& a, StereoBuffer& grad) const {
    require(grad.size() == a.size() && grad.right.size() == a.size(), ErrorKind::shape,
            "MSS gradient buffer has the wrong length");
    return evaluate(a, &grad);
}

double MssReference::evaluate(const StereoBuffer& a, StereoBuffer* grad) const {
    require(a.size() == length_, ErrorKind::shape, "MSS inputs must have equal lengths");
    a.validate();
    std::array<Spectrum, 4> specs;
    Spectrum grad_l, grad_r;
    std::vector<double> mag;
    std::vector<signed char> sign;
    double total = 0.0;
    for (std::size_t scale = 0; scale < kMssSizes.size(); ++scale) {
        const std::size_t size = kMssSizes[scale];
        Stft stft(size, size / 4);
        view_spectra(stft, a, specs);
        const std::size_t n = specs[0].size();
        const std::size_t bins = size / 2 + 1;
        const std::size_t frames = n / bins;
        const std::size_t log_count = n - 2 * frames;
        mag.resize(n);
        sign.resize(n);
        if (grad) {
            grad_l.assign(n, 0.0);
            grad_r.assign(n, 0.0);
        }
        for (std::size_t v = 0; v < specs.size(); ++v) {
            Spectrum& spec = specs[v];
            const Scale& ref = views_[v][scale];
            double diff2 = 0.0;
            double log_sum = 0.0;
            for (std::size_t t = 0; t < frames; ++t) {
                const std::size_t row = t * bins;
                for (std::size_t k = 0; k < bins; ++k) {
                    const std::size_t i = row + k;
                    const double m = std::sqrt(std::norm(spec[i]));
                    mag[i] = m;
                    const double d = m - ref.mag[i];
                    diff2 += d * d;
                    // DC and Nyquist bins are real: their magnitude hits zero on
                    // a hypersurface of the parameters and the log spikes there.
                    if (k == 0 || k == bins - 1) {
                        sign[i] = 0;
                        continue;
                    }
                    const double ld = std::log(m + kMssEps) - ref.log_mag[i];
                    log_sum += std::abs(ld);
                    sign[i] = static_cast<signed char>((ld > 0.0) - (ld < 0.0));
                }
            }
            const double diff = std::sqrt(diff2);
            const double denom = ref.norm + kMssEps;
            total += diff / denom + log_sum / static_cast<double>(log_count);
            if (!grad) continue;

            const double c_lin = diff > 0.0 ? 1.0 / (diff * denom) : 0.0;
            const double c_log = 1.0 / static_cast<double>(log_count);
            // dL/dRe + i dL/dIm of this view, folded onto the channel spectra.
            const double to_r = v == 0 ? 0.0 : v == 3 ? -1.0 : 1.0;
            const double to_l = v == 1 ? 0.0 : 1.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double m = mag[i];
                if (m == 0.0) continue;
                const double gm = c_lin * (m - ref.mag[i]) + c_log * sign[i] / (m + kMssEps);
                const std::complex<double> g = spec[i] * (gm / m);
                grad_l[i] += to_l * g;
                grad_r[i] += to_r * g;
            }
        }
        if (grad) {
            stft.backward(grad_l, grad->left);
            stft.backward(grad_r, grad->right);
        }
    }
    return total;
}

double mss_loss(const StereoBuffer& a, const StereoBuffer& b) {
    require(a.size() == b.size(), ErrorKind::shape, "MSS inputs must have equal lengths");
    return MssReference(b).loss(a);
}

}  // namespace fxfit
