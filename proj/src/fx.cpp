#include "fxfit/fx.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>

#include "fxfit/biquad.hpp"
#include "fxfit/error.hpp"

namespace fxfit {

namespace {

constexpr double kFs = static_cast<double>(kSampleRate);
constexpr double kLevelFloor = 1e-5;
constexpr double kDbToNeper = std::numbers::ln10 / 20.0;  // d(10^(x/20))/dx = 10^(x/20) * this

// Flattened parameter offsets.
constexpr std::size_t kEqOffset = 0;
constexpr std::size_t kDistOffset = 18;
constexpr std::size_t kMbOffset = 20;
constexpr std::size_t kMakeupOffset = 37;
constexpr std::size_t kWidthOffset = 38;
constexpr std::size_t kLimOffset = 39;

using Channel = std::vector<double>;
using Channels = std::array<Channel, 2>;

using Grads = std::array<double, kNumParams>;

Channels channels_of(const StereoBuffer& x) { return {x.left, x.right}; }

StereoBuffer buffer_of(Channels c) { return StereoBuffer(std::move(c[0]), std::move(c[1])); }

void check_range(std::string_view what, double v, double lo, double hi) {
    if (!(v >= lo && v <= hi)) {
        fail(ErrorKind::range, std::string(what) + " = " + std::to_string(v) + " outside [" + std::to_string(lo) +
                                   ", " + std::to_string(hi) + "]");
    }
}

void check_schema(std::size_t index, double v) {
    const auto& s = param_schema()[index];
    check_range(s.full_name(), v, s.min, s.max);
}

// ---------------------------------------------------------------------------
// Equalizer

template <class T>
BiquadT<T> design_eq_band(std::size_t band, T freq, T gain, T q) {
    if (band == 0) return design_low_shelf(freq, gain, q, kFs);
    if (band == kNumEqBands - 1) return design_high_shelf(freq, gain, q, kFs);
    return design_peaking(freq, gain, q, kFs);
}

struct EqStage {
    EqParams params{};
    std::array<Biquad, kNumEqBands> coeffs{};
    // taps[b] is the input of band b; taps[kNumEqBands] is the stage output.
    std::array<Channels, kNumEqBands + 1> taps;

    Channels& forward(Channels in, const EqParams& eq) {
        params = eq;
        taps[0] = std::move(in);
        for (std::size_t b = 0; b < kNumEqBands; ++b) {
            const auto& p = eq.bands[b];
            coeffs[b] = design_eq_band<double>(b, p.center_freq, p.gain, p.q);
            for (int c = 0; c < 2; ++c) {
                taps[b + 1][c].resize(taps[b][c].size());
                biquad_forward(coeffs[b], taps[b][c], taps[b + 1][c]);
            }
        }
        return taps[kNumEqBands];
    }

    void backward(Channels& g, Grads& grads) const {
        for (std::size_t b = kNumEqBands; b-- > 0;) {
            BiquadGrad gc;
            for (int c = 0; c < 2; ++c) biquad_backward(coeffs[b], taps[b][c], taps[b + 1][c], g[c], gc);
            const auto& p = params.bands[b];
            using D = Dual<3>;
            const auto jac = design_eq_band<D>(b, D(p.center_freq, 0), D(p.gain, 1), D(p.q, 2));
            const auto d = contract(jac, gc);
            for (std::size_t k = 0; k < 3; ++k) grads[kEqOffset + 3 * b + k] += d[k];
        }
    }
};

// ---------------------------------------------------------------------------
// Distortion

struct DistortionStage {
    double drive = 0.0, mix = 0.0;
    Channels input;
    Channels output;

    Channels& forward(Channels in, double drive_db, double mix_) {
        drive = drive_db;
        mix = mix_;
        input = std::move(in);
        const double g = std::pow(10.0, drive / 20.0);
        const double norm = 1.0 / std::tanh(g);
        for (int c = 0; c < 2; ++c) {
            output[c].resize(input[c].size());
            for (std::size_t i = 0; i < input[c].size(); ++i) {
                const double x = input[c][i];
                output[c][i] = mix * (std::tanh(g * x) * norm) + (1.0 - mix) * x;
            }
        }
        return output;
    }

    void backward(Channels& g_out, Grads& grads) const {
        const double g = std::pow(10.0, drive / 20.0);
        const double tg = std::tanh(g);
        const double sech2_g = 1.0 - tg * tg;
        double d_mix = 0.0, d_gain = 0.0;
        for (int c = 0; c < 2; ++c) {
            for (std::size_t i = 0; i < input[c].size(); ++i) {
                const double x = input[c][i];
                const double t = std::tanh(g * x);
                const double sech2 = 1.0 - t * t;
                const double gy = g_out[c][i];
                d_mix += gy * (t / tg - x);
                d_gain += gy * mix * (x * sech2 * tg - t * sech2_g) / (tg * tg);
                g_out[c][i] = gy * (mix * g * sech2 / tg + (1.0 - mix));
            }
        }
        grads[kDistOffset] += d_gain * g * kDbToNeper;
        grads[kDistOffset + 1] += d_mix;
    }
};

// ---------------------------------------------------------------------------
// Dynamics: stereo-linked peak detector, static compressor/expander curve,
// switched one-pole gain smoothing in dB.

struct DynamicsSettings {
    double comp_threshold;
    double comp_ratio;
    double exp_threshold;
    double exp_ratio;
    double attack_ms;
    double release_ms;
    double gain_db;
};

struct DynamicsGrad {
    double comp_threshold = 0.0, comp_ratio = 0.0, exp_threshold = 0.0, exp_ratio = 0.0;
    double attack_ms = 0.0, release_ms = 0.0, gain_db = 0.0;
};

enum : std::uint8_t { kWinLeft = 0, kWinRight = 1, kWinFloor = 2 };
enum : std::uint8_t { kRegionNone = 0, kRegionComp = 1, kRegionExp = 2 };

double smoothing_coeff(double ms) { return std::exp(-1.0 / (kFs * ms * 1e-3)); }

double curve(double level, const DynamicsSettings& s, std::uint8_t& region) {
    if (level > s.comp_threshold) {
        region = kRegionComp;
        return (s.comp_threshold - level) * (1.0 - 1.0 / s.comp_ratio);
    }
    if (level < s.exp_threshold) {
        region = kRegionExp;
        return (s.exp_threshold - level) * (1.0 - 1.0 / s.exp_ratio);
    }
    region = kRegionNone;
    return 0.0;
}

struct DynamicsStage {
    DynamicsSettings s{};
    Channels input;
    std::vector<double> level;
    std::vector<double> target;  // static gain, dB
    std::vector<double> smooth;  // smoothed gain, dB
    std::vector<double> gain;    // linear
    std::vector<std::uint8_t> flags;  // winner | region << 2 | attack << 4

    void forward(Channels in, const DynamicsSettings& settings, Channels& out) {
        s = settings;
        input = std::move(in);
        const std::size_t n = input[0].size();
        level.resize(n);
        target.resize(n);
        smooth.resize(n);
        gain.resize(n);
        flags.resize(n);
        out[0].resize(n);
        out[1].resize(n);
        const double aa = smoothing_coeff(s.attack_ms);
        const double ar = smoothing_coeff(s.release_ms);
        double prev = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double l = input[0][i];
            const double r = input[1][i];
            const double al = std::abs(l);
            const double arr = std::abs(r);
            std::uint8_t win = al >= arr ? kWinLeft : kWinRight;
            double peak = std::max(al, arr);
            if (peak < kLevelFloor) {
                peak = kLevelFloor;
                win = kWinFloor;
            }
            const double lv = 20.0 * std::log10(peak);
            std::uint8_t region;
            const double gs = curve(lv, s, region);
            const bool attack = gs < prev;
            const double a = attack ? aa : ar;
            const double sm = (1.0 - a) * gs + a * prev;
            const double gl = std::exp((sm + s.gain_db) * kDbToNeper);
            level[i] = lv;
            target[i] = gs;
            smooth[i] = sm;
            gain[i] = gl;
            flags[i] = static_cast<std::uint8_t>(win | (region << 2) | (attack ? 16 : 0));
            out[0][i] = l * gl;
            out[1][i] = r * gl;
            prev = sm;
        }
    }

    void backward(Channels& g, DynamicsGrad& dg) const {
        const std::size_t n = input[0].size();
        const double aa = smoothing_coeff(s.attack_ms);
        const double ar = smoothing_coeff(s.release_ms);
        const double comp_slope = 1.0 - 1.0 / s.comp_ratio;
        const double exp_slope = 1.0 - 1.0 / s.exp_ratio;
        double lambda_next = 0.0;  // dL/dsmooth[i+1]
        double alpha_next = 0.0;
        double d_aa = 0.0, d_ar = 0.0;
        for (std::size_t i = n; i-- > 0;) {
            const double l = input[0][i];
            const double r = input[1][i];
            const double gl = gain[i];
            const double gyl = g[0][i];
            const double gyr = g[1][i];
            const double direct = (gyl * l + gyr * r) * gl * kDbToNeper;
            dg.gain_db += direct;
            const double lambda = direct + alpha_next * lambda_next;
            const std::uint8_t f = flags[i];
            const bool attack = (f & 16) != 0;
            const double a = attack ? aa : ar;
            const double prev = i > 0 ? smooth[i - 1] : 0.0;
            const double d_alpha = lambda * (prev - target[i]);
            (attack ? d_aa : d_ar) += d_alpha;
            const double d_target = (1.0 - a) * lambda;

            double gxl = gyl * gl;
            double gxr = gyr * gl;
            const std::uint8_t region = (f >> 2) & 3;
            double d_level = 0.0;
            if (region == kRegionComp) {
                dg.comp_threshold += d_target * comp_slope;
                dg.comp_ratio += d_target * (s.comp_threshold - level[i]) / (s.comp_ratio * s.comp_ratio);
                d_level = -d_target * comp_slope;
            } else if (region == kRegionExp) {
                dg.exp_threshold += d_target * exp_slope;
                dg.exp_ratio += d_target * (s.exp_threshold - level[i]) / (s.exp_ratio * s.exp_ratio);
                d_level = -d_target * exp_slope;
            }
            if (d_level != 0.0) {
                const std::uint8_t win = f & 3;
                if (win == kWinLeft) gxl += d_level / (kDbToNeper * l);
                else if (win == kWinRight) gxr += d_level / (kDbToNeper * r);
            }
            g[0][i] = gxl;
            g[1][i] = gxr;
            lambda_next = lambda;
            alpha_next = a;
        }
        // alpha = exp(-1 / (fs * tau)), tau = ms / 1000.
        auto d_ms = [](double ms, double alpha) {
            const double tau = ms * 1e-3;
            return alpha / (kFs * tau * tau) * 1e-3;
        };
        dg.attack_ms += d_aa * d_ms(s.attack_ms, aa);
        dg.release_ms += d_ar * d_ms(s.release_ms, ar);
    }
};

// Band compressors never expand.
DynamicsSettings band_settings(const CompBand& b) {
    return {b.threshold, b.ratio, -1.0e9, 1.0, b.attack, b.release, b.makeup};
}

DynamicsSettings limiter_settings(const LimiterParams& p) {
    return {p.comp_threshold, p.comp_ratio, p.exp_threshold, p.exp_ratio, p.attack, p.release, p.output_gain};
}

// ---------------------------------------------------------------------------
// Linkwitz-Riley crossover

struct CrossoverStage {
    double f_low = 0.0, f_high = 0.0;
    Biquad lp_l{}, hp_l{}, lp_h{}, hp_h{}, ap_h{};
    // Per channel: x -> lp1 -> lp2 -> low (allpass)
    //              x -> hp1 -> hp2 -> m1 -> mid
    //                               -> h1 -> high
    std::array<Channel, 2> x, lp1, lp2, hp1, hp2, m1, h1;
    Channels low, mid, high;

    void forward(Channels in, double fl, double fh) {
        f_low = fl;
        f_high = fh;
        lp_l = design_butter_lowpass<double>(fl, kFs);
        hp_l = design_butter_highpass<double>(fl, kFs);
        lp_h = design_butter_lowpass<double>(fh, kFs);
        hp_h = design_butter_highpass<double>(fh, kFs);
        ap_h = design_butter_allpass<double>(fh, kFs);
        x = std::move(in);
        for (int c = 0; c < 2; ++c) {
            const std::size_t n = x[c].size();
            for (auto* v : {&lp1[c], &lp2[c], &hp1[c], &hp2[c], &m1[c], &h1[c], &low[c], &mid[c], &high[c]})
                v->resize(n);
            biquad_forward(lp_l, x[c], lp1[c]);
            biquad_forward(lp_l, lp1[c], lp2[c]);
            biquad_forward(ap_h, lp2[c], low[c]);
            biquad_forward(hp_l, x[c], hp1[c]);
            biquad_forward(hp_l, hp1[c], hp2[c]);
            biquad_forward(lp_h, hp2[c], m1[c]);
            biquad_forward(lp_h, m1[c], mid[c]);
            biquad_forward(hp_h, hp2[c], h1[c]);
            biquad_forward(hp_h, h1[c], high[c]);
        }
    }

    /// Consumes band gradients and leaves dL/dx in `g_low`.
    void backward(Channels& g_low, Channels& g_mid, Channels& g_high, double& d_fl, double& d_fh) const {
        BiquadGrad glp_l, ghp_l, glp_h, ghp_h, gap_h;
        for (int c = 0; c < 2; ++c) {
            biquad_backward(ap_h, lp2[c], low[c], g_low[c], gap_h);
            biquad_backward(lp_l, lp1[c], lp2[c], g_low[c], glp_l);
            biquad_backward(lp_l, x[c], lp1[c], g_low[c], glp_l);

            biquad_backward(lp_h, m1[c], mid[c], g_mid[c], glp_h);
            biquad_backward(lp_h, hp2[c], m1[c], g_mid[c], glp_h);
            biquad_backward(hp_h, h1[c], high[c], g_high[c], ghp_h);
            biquad_backward(hp_h, hp2[c], h1[c], g_high[c], ghp_h);
            for (std::size_t i = 0; i < g_mid[c].size(); ++i) g_mid[c][i] += g_high[c][i];
            biquad_backward(hp_l, hp1[c], hp2[c], g_mid[c], ghp_l);
            biquad_backward(hp_l, x[c], hp1[c], g_mid[c], ghp_l);
            for (std::size_t i = 0; i < g_low[c].size(); ++i) g_low[c][i] += g_mid[c][i];
        }
        using D = Dual<1>;
        const D fl(f_low, 0), fh(f_high, 0);
        d_fl += contract(design_butter_lowpass(fl, kFs), glp_l)[0] + contract(design_butter_highpass(fl, kFs), ghp_l)[0];
        d_fh += contract(design_butter_lowpass(fh, kFs), glp_h)[0] + contract(design_butter_highpass(fh, kFs), ghp_h)[0] +
                contract(design_butter_allpass(fh, kFs), gap_h)[0];
    }
};

struct MultibandStage {
    MultibandParams params{};
    CrossoverStage split;
    std::array<DynamicsStage, kNumCompBands> comps;
    Channels output;

    Channels& forward(Channels in, const MultibandParams& mb) {
        params = mb;
        split.forward(std::move(in), mb.xover_low, mb.xover_high);
        std::array<Channels, kNumCompBands> outs;
        comps[0].forward(split.low, band_settings(mb.bands[0]), outs[0]);
        comps[1].forward(split.mid, band_settings(mb.bands[1]), outs[1]);
        comps[2].forward(split.high, band_settings(mb.bands[2]), outs[2]);
        for (int c = 0; c < 2; ++c) {
            const std::size_t n = outs[0][c].size();
            output[c].resize(n);
            for (std::size_t i = 0; i < n; ++i) output[c][i] = outs[0][c][i] + outs[1][c][i] + outs[2][c][i];
        }
        return output;
    }

    void backward(Channels& g, Grads& grads) const {
        std::array<Channels, kNumCompBands> gb{g, g, std::move(g)};
        for (std::size_t b = 0; b < kNumCompBands; ++b) {
            DynamicsGrad dg;
            comps[b].backward(gb[b], dg);
            const std::size_t o = kMbOffset + 2 + 5 * b;
            grads[o] += dg.comp_threshold;
            grads[o + 1] += dg.comp_ratio;
            grads[o + 2] += dg.attack_ms;
            grads[o + 3] += dg.release_ms;
            grads[o + 4] += dg.gain_db;
        }
        split.backward(gb[0], gb[1], gb[2], grads[kMbOffset], grads[kMbOffset + 1]);
        g = std::move(gb[0]);
    }
};

// ---------------------------------------------------------------------------
// Makeup gain, stereo imager

struct MakeupStage {
    double gain_db = 0.0;
    Channels output;

    Channels& forward(Channels in, double g) {
        gain_db = g;
        const double scale = std::pow(10.0, g / 20.0);
        output = std::move(in);
        for (auto& ch : output)
            for (auto& v : ch) v *= scale;
        return output;
    }

    void backward(Channels& g, Grads& grads) const {
        const double scale = std::pow(10.0, gain_db / 20.0);
        double d = 0.0;
        for (int c = 0; c < 2; ++c) {
            for (std::size_t i = 0; i < g[c].size(); ++i) {
                d += g[c][i] * output[c][i];
                g[c][i] *= scale;
            }
        }
        grads[kMakeupOffset] += d * kDbToNeper;
    }
};

struct ImagerStage {
    double width = 1.0;
    Channels input;
    Channels output;

    Channels& forward(Channels in, double w) {
        width = w;
        input = std::move(in);
        const std::size_t n = input[0].size();
        output[0].resize(n);
        output[1].resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double l = input[0][i];
            const double r = input[1][i];
            // (m + w s) / 2 with m = l + r, s = l - r; exact at w = 1.
            output[0][i] = ((1.0 + w) * l + (1.0 - w) * r) / 2.0;
            output[1][i] = ((1.0 - w) * l + (1.0 + w) * r) / 2.0;
        }
        return output;
    }

    void backward(Channels& g, Grads& grads) const {
        double d = 0.0;
        for (std::size_t i = 0; i < g[0].size(); ++i) {
            const double gl = g[0][i];
            const double gr = g[1][i];
            d += (gl - gr) * (input[0][i] - input[1][i]) / 2.0;
            g[0][i] = ((1.0 + width) * gl + (1.0 - width) * gr) / 2.0;
            g[1][i] = ((1.0 - width) * gl + (1.0 + width) * gr) / 2.0;
        }
        grads[kWidthOffset] += d;
    }
};

struct LimiterStage {
    DynamicsStage dyn;
    Channels output;

    Channels& forward(Channels in, const LimiterParams& p) {
        dyn.forward(std::move(in), limiter_settings(p), output);
        return output;
    }

    void backward(Channels& g, Grads& grads) const {
        DynamicsGrad dg;
        dyn.backward(g, dg);
        grads[kLimOffset] += dg.comp_threshold;
        grads[kLimOffset + 1] += dg.comp_ratio;
        grads[kLimOffset + 2] += dg.exp_threshold;
        grads[kLimOffset + 3] += dg.exp_ratio;
        grads[kLimOffset + 4] += dg.attack_ms;
        grads[kLimOffset + 5] += dg.release_ms;
        grads[kLimOffset + 6] += dg.gain_db;
    }
};

void check_eq(const EqParams& eq) {
    for (std::size_t b = 0; b < kNumEqBands; ++b) {
        check_schema(kEqOffset + 3 * b, eq.bands[b].center_freq);
        check_schema(kEqOffset + 3 * b + 1, eq.bands[b].gain);
        check_schema(kEqOffset + 3 * b + 2, eq.bands[b].q);
    }
}

void check_crossover(double lo, double hi) {
    check_range("xover_low", lo, 40.0, 12000.0);
    check_range("xover_high", hi, 40.0, 12000.0);
    require(lo < hi, ErrorKind::range, "xover_low must be below xover_high");
}

void check_multiband(const MultibandParams& mb) {
    check_schema(kMbOffset, mb.xover_low);
    check_schema(kMbOffset + 1, mb.xover_high);
    check_crossover(mb.xover_low, mb.xover_high);
    for (std::size_t b = 0; b < kNumCompBands; ++b) {
        const auto& p = mb.bands[b];
        const std::size_t o = kMbOffset + 2 + 5 * b;
        check_schema(o, p.threshold);
        check_schema(o + 1, p.ratio);
        check_schema(o + 2, p.attack);
        check_schema(o + 3, p.release);
        check_schema(o + 4, p.makeup);
    }
}

void check_limiter(const LimiterParams& p) {
    check_schema(kLimOffset, p.comp_threshold);
    check_schema(kLimOffset + 1, p.comp_ratio);
    check_schema(kLimOffset + 2, p.exp_threshold);
    check_schema(kLimOffset + 3, p.exp_ratio);
    check_schema(kLimOffset + 4, p.attack);
    check_schema(kLimOffset + 5, p.release);
    check_schema(kLimOffset + 6, p.output_gain);
    require(p.exp_threshold < p.comp_threshold, ErrorKind::range,
            "limiter exp_threshold must be below comp_threshold");
}

}  // namespace

// ---------------------------------------------------------------------------
// Public processors

StereoBuffer apply_equalizer(const StereoBuffer& x, const EqParams& eq) {
    x.validate();
    check_eq(eq);
    EqStage s;
    return buffer_of(std::move(s.forward(channels_of(x), eq)));
}

StereoBuffer apply_distortion(const StereoBuffer& x, double drive, double mix) {
    x.validate();
    check_schema(kDistOffset, drive);
    check_schema(kDistOffset + 1, mix);
    DistortionStage s;
    return buffer_of(std::move(s.forward(channels_of(x), drive, mix)));
}

BandSplit split_bands(const StereoBuffer& x, double xover_low, double xover_high) {
    x.validate();
    check_crossover(xover_low, xover_high);
    CrossoverStage s;
    s.forward(channels_of(x), xover_low, xover_high);
    return {buffer_of(std::move(s.low)), buffer_of(std::move(s.mid)), buffer_of(std::move(s.high))};
}

StereoBuffer apply_multiband_compressor(const StereoBuffer& x, const MultibandParams& mb) {
    x.validate();
    check_multiband(mb);
    MultibandStage s;
    return buffer_of(std::move(s.forward(channels_of(x), mb)));
}

StereoBuffer apply_makeup_gain(const StereoBuffer& x, double gain_db) {
    x.validate();
    check_range("makeup gain", gain_db, -24.0, 24.0);
    MakeupStage s;
    return buffer_of(std::move(s.forward(channels_of(x), gain_db)));
}

StereoBuffer apply_stereo_imager(const StereoBuffer& x, double width) {
    x.validate();
    check_schema(kWidthOffset, width);
    ImagerStage s;
    return buffer_of(std::move(s.forward(channels_of(x), width)));
}

StereoBuffer apply_limiter(const StereoBuffer& x, const LimiterParams& lim) {
    x.validate();
    check_limiter(lim);
    LimiterStage s;
    return buffer_of(std::move(s.forward(channels_of(x), lim)));
}

double static_gain_db(double level_db, double comp_threshold, double comp_ratio, double exp_threshold,
                      double exp_ratio) {
    std::uint8_t region;
    return curve(level_db, {comp_threshold, comp_ratio, exp_threshold, exp_ratio, 1.0, 1.0, 0.0}, region);
}

// ---------------------------------------------------------------------------
// Chain

struct ChainRecording::Impl {
    ModuleMask mask;
    std::optional<EqStage> eq;
    std::optional<DistortionStage> dist;
    std::optional<MultibandStage> mb;
    std::optional<MakeupStage> makeup;
    std::optional<ImagerStage> imager;
    std::optional<LimiterStage> limiter;
    StereoBuffer output;
};

ChainRecording::ChainRecording(const StereoBuffer& x, const ChainParams& p, const ModuleMask& mask)
    : impl_(std::make_unique<Impl>()) {
    x.validate();
    validate(p);
    impl_->mask = mask;
    Channels cur = channels_of(x);
    auto& m = *impl_;
    if (mask[Module::equalizer]) cur = m.eq.emplace().forward(std::move(cur), p.eq);
    if (mask[Module::distortion])
        cur = m.dist.emplace().forward(std::move(cur), p.distortion.drive, p.distortion.mix);
    if (mask[Module::multiband_comp]) cur = m.mb.emplace().forward(std::move(cur), p.multiband);
    if (mask[Module::makeup_gain]) cur = m.makeup.emplace().forward(std::move(cur), p.makeup_gain);
    if (mask[Module::stereo_imager]) cur = m.imager.emplace().forward(std::move(cur), p.width);
    if (mask[Module::limiter]) cur = m.limiter.emplace().forward(std::move(cur), p.limiter);
    m.output = buffer_of(std::move(cur));
}

ChainRecording::~ChainRecording() = default;
ChainRecording::ChainRecording(ChainRecording&&) noexcept = default;
ChainRecording& ChainRecording::operator=(ChainRecording&&) noexcept = default;

const StereoBuffer& ChainRecording::output() const { return impl_->output; }

std::array<double, kNumParams> ChainRecording::backward(const StereoBuffer& output_grad) const {
    require(output_grad.size() == impl_->output.size() && output_grad.right.size() == output_grad.size(),
            ErrorKind::shape, "output gradient length mismatch");
    Grads grads{};
    Channels g = channels_of(output_grad);
    const auto& m = *impl_;
    if (m.limiter) m.limiter->backward(g, grads);
    if (m.imager) m.imager->backward(g, grads);
    if (m.makeup) m.makeup->backward(g, grads);
    if (m.mb) m.mb->backward(g, grads);
    if (m.dist) m.dist->backward(g, grads);
    if (m.eq) m.eq->backward(g, grads);
    return grads;
}

StereoBuffer apply_chain(const StereoBuffer& x, const ChainParams& params, const ModuleMask& mask) {
    ChainRecording rec(x, params, mask);
    return rec.output();
}

}  // namespace fxfit
