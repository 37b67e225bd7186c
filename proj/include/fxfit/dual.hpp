#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace fxfit {

/// Forward-mode dual number with N tangent directions. Used to get exact
/// Jacobians of filter-coefficient formulas.
template <std::size_t N>
struct Dual {
    double v = 0.0;
    std::array<double, N> d{};

    Dual() = default;
    Dual(double value) : v(value) {}  // NOLINT: implicit constant lift
    Dual(double value, std::size_t seed) : v(value) { d[seed] = 1.0; }

    friend Dual operator+(const Dual& a, const Dual& b) {
        Dual r(a.v + b.v);
        for (std::size_t i = 0; i < N; ++i) r.d[i] = a.d[i] + b.d[i];
        return r;
    }
    friend Dual operator-(const Dual& a, const Dual& b) {
        Dual r(a.v - b.v);
        for (std::size_t i = 0; i < N; ++i) r.d[i] = a.d[i] - b.d[i];
        return r;
    }
    friend Dual operator-(const Dual& a) {
        Dual r(-a.v);
        for (std::size_t i = 0; i < N; ++i) r.d[i] = -a.d[i];
        return r;
    }
    friend Dual operator*(const Dual& a, const Dual& b) {
        Dual r(a.v * b.v);
        for (std::size_t i = 0; i < N; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
        return r;
    }
    friend Dual operator/(const Dual& a, const Dual& b) {
        Dual r(a.v / b.v);
        const double inv = 1.0 / (b.v * b.v);
        for (std::size_t i = 0; i < N; ++i) r.d[i] = (a.d[i] * b.v - a.v * b.d[i]) * inv;
        return r;
    }

    friend Dual chain(const Dual& a, double value, double slope) {
        Dual r(value);
        for (std::size_t i = 0; i < N; ++i) r.d[i] = slope * a.d[i];
        return r;
    }
    friend Dual sin(const Dual& a) { return chain(a, std::sin(a.v), std::cos(a.v)); }
    friend Dual cos(const Dual& a) { return chain(a, std::cos(a.v), -std::sin(a.v)); }
    friend Dual tan(const Dual& a) {
        const double t = std::tan(a.v);
        return chain(a, t, 1.0 + t * t);
    }
    friend Dual sqrt(const Dual& a) {
        const double s = std::sqrt(a.v);
        return chain(a, s, 0.5 / s);
    }
    friend Dual exp(const Dual& a) {
        const double e = std::exp(a.v);
        return chain(a, e, e);
    }
    friend Dual log(const Dual& a) { return chain(a, std::log(a.v), 1.0 / a.v); }
};

inline double value_of(double x) { return x; }
template <std::size_t N>
double value_of(const Dual<N>& x) {
    return x.v;
}

}  // namespace fxfit
