#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <string>

namespace itts {

enum class Module { Frontend, Encoder, Decoder, Vocoder };

const char* module_name(Module m);

// Affine batch cost T(B) = base + per_item * B, in seconds.
struct ModuleCost {
  double base_seconds = 0.0;
  double per_item_seconds = 0.0;

  double operator()(std::size_t batch) const {
    return batch == 0 ? 0.0 : base_seconds + per_item_seconds * static_cast<double>(batch);
  }
};

// Emulated accelerator time. Frontend and encoder are charged once per
// batch; decoder and vocoder once per mel-frame step of the (padded) batch.
struct CostModel {
  ModuleCost frontend;
  ModuleCost encoder;
  ModuleCost decoder;
  ModuleCost vocoder;

  const ModuleCost& of(Module m) const;
  double charge(Module m, std::size_t batch, std::size_t frame_steps = 1) const;

  static CostModel zero() { return {}; }
  // Desk-scale calibration: a loaded incremental iteration takes ~10-30 ms.
  static CostModel defaults();
};

// Reads `cost.<module>.base_ms` / `cost.<module>.per_item_ms` keys from the
// shared key-value config format; other keys are ignored.
CostModel parse_cost_model(const std::string& text, CostModel base = CostModel::defaults());
CostModel load_cost_model(const std::filesystem::path& path);

using Clock = std::chrono::steady_clock;

// Sleeps for most of the interval and spins the remainder, so charged module
// time lands within tens of microseconds of the deadline.
void wait_until(Clock::time_point deadline);

inline Clock::duration to_duration(double seconds) {
  return std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(seconds));
}

inline double seconds_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

}  // namespace itts
