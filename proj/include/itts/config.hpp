#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

namespace itts {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PipelineConfig {
  int chunk_frames = 32;
  int overlap_frames = 4;
  int hop_samples = 256;
  int sample_rate = 22050;
  int feature_dim = 8;
  int frames_per_phoneme = 8;
  double stop_threshold = 0.5;
  double attention_penalty = 0.1;

  // Samples covered by the cross-fade region.
  int overlap_samples() const { return overlap_frames * hop_samples; }
  int chunk_samples() const { return chunk_frames * hop_samples; }
  double chunk_seconds() const {
    return static_cast<double>(chunk_samples()) / sample_rate;
  }
};

// Returns cfg unchanged, or throws ConfigError naming the violated constraint.
PipelineConfig validate_config(const PipelineConfig& cfg);

// Parses `key = value` lines; `#` starts a comment. Unknown keys are
// rejected except the `cost.` namespace, which belongs to the cost model.
// Keys absent from the file keep their defaults.
PipelineConfig parse_config(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);

}  // namespace itts
