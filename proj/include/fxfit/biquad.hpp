#pragma once

#include <cmath>
#include <numbers>
#include <span>

#include "fxfit/dual.hpp"

namespace fxfit {

/// Normalized coefficients (a0 = 1) of
/// y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] - a1 y[n-1] - a2 y[n-2].
template <class T>
struct BiquadT {
    T b0, b1, b2, a1, a2;
};

using Biquad = BiquadT<double>;

template <class T>
Biquad value_of(const BiquadT<T>& c) {
    return {value_of(c.b0), value_of(c.b1), value_of(c.b2), value_of(c.a1), value_of(c.a2)};
}

// RBJ audio-EQ cookbook designs. A 0 dB gain yields b == a bit for bit.

template <class T>
BiquadT<T> design_peaking(T freq, T gain_db, T q, double fs) {
    using std::cos, std::exp, std::sin;
    const T a = exp(gain_db * (std::numbers::ln10 / 40.0));
    const T w0 = freq * (2.0 * std::numbers::pi / fs);
    const T alpha = sin(w0) / (q * 2.0);
    const T cw = cos(w0);
    const T a0 = alpha / a + 1.0;
    return {(alpha * a + 1.0) / a0, (cw * -2.0) / a0, (-(alpha * a) + 1.0) / a0, (cw * -2.0) / a0,
            (-(alpha / a) + 1.0) / a0};
}

template <class T>
BiquadT<T> design_low_shelf(T freq, T gain_db, T q, double fs) {
    using std::cos, std::exp, std::sin, std::sqrt;
    const T a = exp(gain_db * (std::numbers::ln10 / 40.0));
    const T w0 = freq * (2.0 * std::numbers::pi / fs);
    const T alpha = sin(w0) / (q * 2.0);
    const T cw = cos(w0);
    const T ap1 = a + 1.0;
    const T am1 = a - 1.0;
    const T k = sqrt(a) * alpha * 2.0;
    const T a0 = ap1 + am1 * cw + k;
    return {a * (ap1 - am1 * cw + k) / a0, a * (am1 - ap1 * cw) * 2.0 / a0, a * (ap1 - am1 * cw - k) / a0,
            (am1 + ap1 * cw) * -2.0 / a0, (ap1 + am1 * cw - k) / a0};
}

template <class T>
BiquadT<T> design_high_shelf(T freq, T gain_db, T q, double fs) {
    using std::cos, std::exp, std::sin, std::sqrt;
    const T a = exp(gain_db * (std::numbers::ln10 / 40.0));
    const T w0 = freq * (2.0 * std::numbers::pi / fs);
    const T alpha = sin(w0) / (q * 2.0);
    const T cw = cos(w0);
    const T ap1 = a + 1.0;
    const T am1 = a - 1.0;
    const T k = sqrt(a) * alpha * 2.0;
    const T a0 = ap1 - am1 * cw + k;
    return {a * (ap1 + am1 * cw + k) / a0, a * (am1 + ap1 * cw) * -2.0 / a0, a * (ap1 + am1 * cw - k) / a0,
            (am1 - ap1 * cw) * 2.0 / a0, (ap1 - am1 * cw - k) / a0};
}

// Second-order Butterworth sections (bilinear transform with prewarping).
// Squared, they form the Linkwitz-Riley 4th-order pair; their sum equals the
// allpass below.

template <class T>
BiquadT<T> design_butter_lowpass(T freq, double fs) {
    using std::tan;
    const T k = tan(freq * (std::numbers::pi / fs));
    const T kk = k * k;
    const T norm = T(1.0) / (k * std::numbers::sqrt2 + kk + 1.0);
    const T b0 = kk * norm;
    return {b0, b0 * 2.0, b0, (kk - 1.0) * 2.0 * norm, (kk - k * std::numbers::sqrt2 + 1.0) * norm};
}

template <class T>
BiquadT<T> design_butter_highpass(T freq, double fs) {
    using std::tan;
    const T k = tan(freq * (std::numbers::pi / fs));
    const T kk = k * k;
    const T norm = T(1.0) / (k * std::numbers::sqrt2 + kk + 1.0);
    return {norm, norm * -2.0, norm, (kk - 1.0) * 2.0 * norm, (kk - k * std::numbers::sqrt2 + 1.0) * norm};
}

template <class T>
BiquadT<T> design_butter_allpass(T freq, double fs) {
    const auto lp = design_butter_lowpass(freq, fs);
    return {lp.a2, lp.a1, T(1.0), lp.a1, lp.a2};
}

/// Gradient of a scalar loss with respect to the five coefficients.
struct BiquadGrad {
    double b0 = 0.0, b1 = 0.0, b2 = 0.0, a1 = 0.0, a2 = 0.0;
};

/// Direct form I from zero state. `y` may not alias `x`.
void biquad_forward(const Biquad& c, std::span<const double> x, std::span<double> y);

/// Reverse-mode adjoint of biquad_forward. Reads the forward input `x` and
/// output `y`, turns dL/dy (in `grad`) into dL/dx in place and accumulates
/// coefficient gradients into `gc`.
void biquad_backward(const Biquad& c, std::span<const double> x, std::span<const double> y,
                     std::span<double> grad, BiquadGrad& gc);

/// Complex frequency response at `freq` Hz.
double biquad_magnitude_db(const Biquad& c, double freq, double fs);

/// Contract coefficient gradients with a coefficient Jacobian expressed as
/// dual numbers.
template <std::size_t N>
std::array<double, N> contract(const BiquadT<Dual<N>>& c, const BiquadGrad& g) {
    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i)
        out[i] = g.b0 * c.b0.d[i] + g.b1 * c.b1.d[i] + g.b2 * c.b2.d[i] + g.a1 * c.a1.d[i] + g.a2 * c.a2.d[i];
    return out;
}

}  // namespace fxfit
