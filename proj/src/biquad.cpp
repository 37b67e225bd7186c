#include "fxfit/biquad.hpp"

#include <complex>

namespace fxfit {

void biquad_forward(const Biquad& c, std::span<const double> x, std::span<double> y) {
    double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = x[i];
        // Grouped so that b == a reproduces the input exactly.
        const double yi = c.b0 * xi + (c.b1 * x1 - c.a1 * y1) + (c.b2 * x2 - c.a2 * y2);
        x2 = x1;
        x1 = xi;
        y2 = y1;
        y1 = yi;
        y[i] = yi;
    }
}

void biquad_backward(const Biquad& c, std::span<const double> x, std::span<const double> y,
                     std::span<double> grad, BiquadGrad& gc) {
    const std::size_t n = grad.size();
    if (n == 0) return;
    // e[i] = dL/dy[i] including every later sample's dependence on y[i].
    double e1 = 0.0, e2 = 0.0;
    double gb0 = 0.0, gb1 = 0.0, gb2 = 0.0, ga1 = 0.0, ga2 = 0.0;
    for (std::size_t k = n; k-- > 0;) {
        const double e = grad[k] - c.a1 * e1 - c.a2 * e2;
        grad[k] = e;
        gb0 += e * x[k];
        if (k >= 1) {
            gb1 += e * x[k - 1];
            ga1 -= e * y[k - 1];
        }
        if (k >= 2) {
            gb2 += e * x[k - 2];
            ga2 -= e * y[k - 2];
        }
        e2 = e1;
        e1 = e;
    }
    gc.b0 += gb0;
    gc.b1 += gb1;
    gc.b2 += gb2;
    gc.a1 += ga1;
    gc.a2 += ga2;
    // dL/dx[i] = b0 e[i] + b1 e[i+1] + b2 e[i+2], written over e in place.
    for (std::size_t i = 0; i < n; ++i) {
        const double e0 = grad[i];
        const double en1 = i + 1 < n ? grad[i + 1] : 0.0;
        const double en2 = i + 2 < n ? grad[i + 2] : 0.0;
        grad[i] = c.b0 * e0 + c.b1 * en1 + c.b2 * en2;
    }
}

double biquad_magnitude_db(const Biquad& c, double freq, double fs) {
    const std::complex<double> z1 = std::polar(1.0, -2.0 * std::numbers::pi * freq / fs);
    const std::complex<double> z2 = z1 * z1;
    const std::complex<double> h = (c.b0 + c.b1 * z1 + c.b2 * z2) / (1.0 + c.a1 * z1 + c.a2 * z2);
    return 20.0 * std::log10(std::abs(h));
}

}  // namespace fxfit
