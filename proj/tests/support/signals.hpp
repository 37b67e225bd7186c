#pragma once

#include <cstdint>
#include <vector>

#include "fxfit/audio.hpp"

namespace fxfit::test {

/// Gaussian noise, independent per channel unless `correlation` > 0.
StereoBuffer white_noise(std::size_t frames, double stddev, std::uint64_t seed, double correlation = 0.0);

/// Stereo pink noise (Voss-McCartney with 16 rows), identical channels when
/// `mono` is set.
StereoBuffer pink_noise(std::size_t frames, double amplitude, std::uint64_t seed, bool mono = false);

StereoBuffer sine(std::size_t frames, double freq, double amplitude, double phase = 0.0);
std::vector<double> sine_channel(std::size_t frames, double freq, double amplitude, double phase = 0.0);
StereoBuffer square(std::size_t frames, double freq, double amplitude);

/// Kick/snare/hat pattern at `bpm` with per-hit velocity variation.
StereoBuffer drum_loop(double seconds, std::uint64_t seed, double bpm = 120.0);

/// Bass line, panned chord pad, lead and drums.
StereoBuffer synthetic_music(double seconds, std::uint64_t seed);

double rms_db(const std::vector<double>& x, std::size_t begin = 0, std::size_t end = 0);
double peak_db(const std::vector<double>& x, std::size_t begin = 0, std::size_t end = 0);

}  // namespace fxfit::test
