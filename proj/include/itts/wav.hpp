#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace itts {

// Clamps to [-1, 1] and scales by 32767, rounding to nearest.
std::int16_t to_pcm16(double sample);
std::vector<std::int16_t> to_pcm16(std::span<const double> samples);
inline double from_pcm16(std::int16_t v) { return static_cast<double>(v) / 32767.0; }

// Mono 16-bit PCM RIFF/WAVE.
void write_wav(const std::filesystem::path& path, std::span<const double> samples,
               int sample_rate);

}  // namespace itts
