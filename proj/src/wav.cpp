#include "itts/wav.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace itts {

std::int16_t to_pcm16(double sample) {
  const double clamped = std::clamp(sample, -1.0, 1.0);
  return static_cast<std::int16_t>(std::lround(clamped * 32767.0));
}

std::vector<std::int16_t> to_pcm16(std::span<const double> samples) {
  std::vector<std::int16_t> out(samples.size());
  std::transform(samples.begin(), samples.end(), out.begin(),
                 [](double s) { return to_pcm16(s); });
  return out;
}

namespace {

void put_le(std::ofstream& out, std::uint32_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

}  // namespace

void write_wav(const std::filesystem::path& path, std::span<const double> samples,
               int sample_rate) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  out.write("RIFF", 4);
  put_le(out, 36 + data_bytes, 4);
  out.write("WAVEfmt ", 8);
  put_le(out, 16, 4);  // PCM fmt chunk size
  put_le(out, 1, 2);   // PCM
  put_le(out, 1, 2);   // mono
  put_le(out, static_cast<std::uint32_t>(sample_rate), 4);
  put_le(out, static_cast<std::uint32_t>(sample_rate) * 2, 4);
  put_le(out, 2, 2);
  put_le(out, 16, 2);
  out.write("data", 4);
  put_le(out, data_bytes, 4);
  for (double s : samples) put_le(out, static_cast<std::uint16_t>(to_pcm16(s)), 2);
}

}  // namespace itts
