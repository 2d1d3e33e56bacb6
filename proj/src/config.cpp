#include "itts/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace itts {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError("config: bad value for '" + key + "': '" + value + "'");
  }
  return out;
}

}  // namespace

PipelineConfig validate_config(const PipelineConfig& cfg) {
  if (cfg.chunk_frames < 1) throw ConfigError("chunk_frames must be >= 1");
  if (cfg.overlap_frames < 1) throw ConfigError("overlap_frames must be >= 1");
  if (cfg.overlap_frames >= cfg.chunk_frames) {
    throw ConfigError("overlap must be < chunk");
  }
  if (cfg.hop_samples < 1) throw ConfigError("hop_samples must be >= 1");
  if (cfg.sample_rate < 1) throw ConfigError("sample_rate must be >= 1");
  if (cfg.feature_dim < 1) throw ConfigError("feature_dim must be >= 1");
  if (cfg.frames_per_phoneme < 1) {
    throw ConfigError("frames_per_phoneme must be >= 1");
  }
  if (!(cfg.stop_threshold > 0.0 && cfg.stop_threshold < 1.0)) {
    throw ConfigError("stop_threshold must lie in (0, 1)");
  }
  if (!(cfg.attention_penalty >= 0.0)) {
    throw ConfigError("attention_penalty must be >= 0");
  }
  return cfg;
}

PipelineConfig parse_config(const std::string& text) {
  PipelineConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key == "chunk_frames") cfg.chunk_frames = parse_number<int>(key, value);
    else if (key == "overlap_frames") cfg.overlap_frames = parse_number<int>(key, value);
    else if (key == "hop_samples") cfg.hop_samples = parse_number<int>(key, value);
    else if (key == "sample_rate") cfg.sample_rate = parse_number<int>(key, value);
    else if (key == "feature_dim") cfg.feature_dim = parse_number<int>(key, value);
    else if (key == "frames_per_phoneme") cfg.frames_per_phoneme = parse_number<int>(key, value);
    else if (key == "stop_threshold") cfg.stop_threshold = parse_number<double>(key, value);
    else if (key == "attention_penalty") cfg.attention_penalty = parse_number<double>(key, value);
    else if (key.starts_with("cost.")) continue;  // read by parse_cost_model
    else throw ConfigError("config: unknown key '" + key + "'");
  }
  return validate_config(cfg);
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace itts
