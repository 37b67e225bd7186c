#include "fxfit/audio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string>

#include "fxfit/error.hpp"

namespace fxfit {

void StereoBuffer::validate() const {
    require(!left.empty(), ErrorKind::empty_input, "audio buffer is empty");
    require(left.size() == right.size(), ErrorKind::shape, "left/right channel lengths differ");
    auto finite = [](double v) { return std::isfinite(v); };
    require(std::all_of(left.begin(), left.end(), finite) &&
                std::all_of(right.begin(), right.end(), finite),
            ErrorKind::non_finite, "audio buffer contains non-finite samples");
}

MidSideBuffer to_mid_side(const StereoBuffer& buf) {
    buf.validate();
    MidSideBuffer ms;
    ms.sample_rate = buf.sample_rate;
    ms.mid.resize(buf.size());
    ms.side.resize(buf.size());
    for (std::size_t i = 0; i < buf.size(); ++i) {
        ms.mid[i] = buf.left[i] + buf.right[i];
        ms.side[i] = buf.left[i] - buf.right[i];
    }
    return ms;
}

StereoBuffer from_mid_side(const MidSideBuffer& ms) {
    require(!ms.mid.empty(), ErrorKind::empty_input, "mid/side buffer is empty");
    require(ms.mid.size() == ms.side.size(), ErrorKind::shape, "mid/side lengths differ");
    StereoBuffer out(ms.mid.size());
    out.sample_rate = ms.sample_rate;
    for (std::size_t i = 0; i < ms.mid.size(); ++i) {
        out.left[i] = (ms.mid[i] + ms.side[i]) / 2.0;
        out.right[i] = (ms.mid[i] - ms.side[i]) / 2.0;
    }
    out.validate();
    return out;
}

// ---------------------------------------------------------------------------
// WAV

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

struct WavFormat {
    std::uint16_t tag = 0;
    std::uint16_t channels = 0;
    std::uint32_t rate = 0;
    std::uint16_t block_align = 0;
    std::uint16_t bits = 0;
};

}  // namespace

StereoBuffer load_audio(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open '" + path.string() + "'");
    std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), {}};
    if (in.bad()) fail(ErrorKind::io, "read failed for '" + path.string() + "'");

    require(bytes.size() >= 12 && std::memcmp(bytes.data(), "RIFF", 4) == 0 &&
                std::memcmp(bytes.data() + 8, "WAVE", 4) == 0,
            ErrorKind::format, "'" + path.string() + "' is not a RIFF/WAVE file");

    WavFormat fmt;
    bool have_fmt = false;
    const unsigned char* data = nullptr;
    std::size_t data_size = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* chunk = bytes.data() + pos;
        const std::uint32_t size = read_u32(chunk + 4);
        const std::size_t body = pos + 8;
        const std::size_t avail = bytes.size() - body;
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            require(size >= 16 && size <= avail, ErrorKind::format, "truncated fmt chunk");
            const unsigned char* p = bytes.data() + body;
            fmt.tag = read_u16(p);
            fmt.channels = read_u16(p + 2);
            fmt.rate = read_u32(p + 4);
            fmt.block_align = read_u16(p + 12);
            fmt.bits = read_u16(p + 14);
            if (fmt.tag == kFormatExtensible) {
                require(size >= 40, ErrorKind::format, "truncated WAVE_FORMAT_EXTENSIBLE header");
                fmt.tag = read_u16(p + 24);
            }
            have_fmt = true;
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            data = bytes.data() + body;
            // Tolerate writers that leave the size field unfinished.
            data_size = std::min<std::size_t>(size, avail);
        }
        pos = body + size + (size & 1u);
    }

    require(have_fmt, ErrorKind::format, "missing fmt chunk");
    require(data != nullptr, ErrorKind::format, "missing data chunk");
    require(fmt.channels == 1 || fmt.channels == 2, ErrorKind::format,
            "unsupported channel count " + std::to_string(fmt.channels));
    const bool pcm16 = fmt.tag == kFormatPcm && fmt.bits == 16;
    const bool pcm24 = fmt.tag == kFormatPcm && fmt.bits == 24;
    const bool f32 = fmt.tag == kFormatFloat && fmt.bits == 32;
    require(pcm16 || pcm24 || f32, ErrorKind::format,
            "unsupported encoding (format " + std::to_string(fmt.tag) + ", " +
                std::to_string(fmt.bits) + " bits)");
    require(fmt.rate > 0, ErrorKind::format, "invalid sample rate");
    const std::size_t sample_bytes = fmt.bits / 8u;
    require(fmt.block_align == sample_bytes * fmt.channels, ErrorKind::format,
            "inconsistent block alignment");

    const std::size_t frames = data_size / fmt.block_align;
    require(frames > 0, ErrorKind::empty_input, "'" + path.string() + "' contains no audio");

    std::array<std::vector<double>, 2> channels;
    for (auto& c : channels) c.resize(frames);
    for (std::size_t i = 0; i < frames; ++i) {
        for (std::size_t c = 0; c < fmt.channels; ++c) {
            const unsigned char* p = data + i * fmt.block_align + c * sample_bytes;
            double v = 0.0;
            if (pcm16) {
                v = static_cast<std::int16_t>(read_u16(p)) / 32768.0;
            } else if (pcm24) {
                std::int32_t s = p[0] | (p[1] << 8) | (p[2] << 16);
                if (s & 0x800000) s -= 0x1000000;
                v = s / 8388608.0;
            } else {
                float f;
                std::memcpy(&f, p, sizeof f);
                v = f;
            }
            channels[c][i] = v;
        }
    }
    if (fmt.channels == 1) channels[1] = channels[0];

    if (static_cast<int>(fmt.rate) != kSampleRate) {
        for (auto& c : channels) c = resample(c, static_cast<int>(fmt.rate), kSampleRate);
    }

    StereoBuffer out(std::move(channels[0]), std::move(channels[1]));
    auto finite = [](double v) { return std::isfinite(v); };
    require(std::all_of(out.left.begin(), out.left.end(), finite) &&
                std::all_of(out.right.begin(), out.right.end(), finite),
            ErrorKind::format, "'" + path.string() + "' contains non-finite samples");
    out.validate();
    return out;
}

void save_audio(const StereoBuffer& buf, const std::filesystem::path& path) {
    buf.validate();
    const std::uint32_t frames = static_cast<std::uint32_t>(buf.size());
    const std::uint32_t data_bytes = frames * 8u;

    std::string out;
    out.reserve(44 + data_bytes);
    out += "RIFF";
    put_u32(out, 36 + data_bytes);
    out += "WAVE";
    out += "fmt ";
    put_u32(out, 16);
    put_u16(out, kFormatFloat);
    put_u16(out, 2);
    put_u32(out, kSampleRate);
    put_u32(out, kSampleRate * 8u);
    put_u16(out, 8);
    put_u16(out, 32);
    out += "data";
    put_u32(out, data_bytes);
    for (std::uint32_t i = 0; i < frames; ++i) {
        for (double v : {buf.left[i], buf.right[i]}) {
            const float f = static_cast<float>(v);
            std::uint32_t bits;
            std::memcpy(&bits, &f, sizeof bits);
            put_u32(out, bits);
        }
    }

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) fail(ErrorKind::io, "cannot open '" + path.string() + "' for writing");
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) fail(ErrorKind::io, "write failed for '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Resampling

namespace {

constexpr int kTaps = 64;
constexpr double kKaiserBeta = 6.0;
constexpr std::size_t kMaxPhaseTable = 8192;

double bessel_i0(double x) {
    double sum = 1.0;
    double term = 1.0;
    const double q = x * x / 4.0;
    for (int k = 1; k < 64; ++k) {
        term *= q / (static_cast<double>(k) * k);
        sum += term;
        if (term < sum * 1e-17) break;
    }
    return sum;
}

// Taps for input samples floor(p) - 31 ... floor(p) + 32 at fractional
// offset `frac`, normalized to unit DC gain.
std::array<double, kTaps> sinc_phase(double frac, double cutoff) {
    constexpr double pi = 3.14159265358979323846;
    const double i0_beta = bessel_i0(kKaiserBeta);
    std::array<double, kTaps> taps{};
    double sum = 0.0;
    for (int k = 0; k < kTaps; ++k) {
        const double t = static_cast<double>(k - kTaps / 2 + 1) - frac;
        const double x = 2.0 * cutoff * t;
        const double sinc = std::abs(x) < 1e-12 ? 1.0 : std::sin(pi * x) / (pi * x);
        const double r = t / (kTaps / 2.0);
        const double win = std::abs(r) < 1.0 ? bessel_i0(kKaiserBeta * std::sqrt(1.0 - r * r)) / i0_beta : 0.0;
        taps[k] = 2.0 * cutoff * sinc * win;
        sum += taps[k];
    }
    for (auto& t : taps) t /= sum;
    return taps;
}

}  // namespace

std::vector<double> resample(std::span<const double> input, int from_rate, int to_rate) {
    require(from_rate > 0 && to_rate > 0, ErrorKind::precondition, "sample rates must be positive");
    require(!input.empty(), ErrorKind::empty_input, "cannot resample empty signal");
    if (from_rate == to_rate) return {input.begin(), input.end()};

    const std::int64_t g = std::gcd(from_rate, to_rate);
    const std::int64_t up = to_rate / g;    // output steps per ...
    const std::int64_t down = from_rate / g;  // ... input steps
    const std::size_t out_len = static_cast<std::size_t>(
        std::llround(static_cast<double>(input.size()) * to_rate / from_rate));
    const double ratio = static_cast<double>(to_rate) / from_rate;
    // Transition band of the 64-tap Kaiser kernel is roughly 0.06 cycles/sample.
    const double cutoff = std::min(0.5, 0.5 * ratio) - 0.03;

    std::vector<std::array<double, kTaps>> table;
    if (static_cast<std::size_t>(up) <= kMaxPhaseTable) {
        table.reserve(static_cast<std::size_t>(up));
        for (std::int64_t ph = 0; ph < up; ++ph)
            table.push_back(sinc_phase(static_cast<double>(ph) / static_cast<double>(up), cutoff));
    }

    std::vector<double> out(out_len, 0.0);
    const auto n_in = static_cast<std::int64_t>(input.size());
    for (std::size_t n = 0; n < out_len; ++n) {
        const std::int64_t num = static_cast<std::int64_t>(n) * down;
        const std::int64_t base = num / up;
        const std::int64_t phase = num % up;
        const std::array<double, kTaps> local =
            table.empty() ? sinc_phase(static_cast<double>(phase) / static_cast<double>(up), cutoff)
                          : std::array<double, kTaps>{};
        const auto& taps = table.empty() ? local : table[static_cast<std::size_t>(phase)];
        double acc = 0.0;
        for (int k = 0; k < kTaps; ++k) {
            const std::int64_t idx = base + k - kTaps / 2 + 1;
            if (idx >= 0 && idx < n_in) acc += taps[k] * input[static_cast<std::size_t>(idx)];
        }
        out[n] = acc;
    }
    return out;
}

}  // namespace fxfit
