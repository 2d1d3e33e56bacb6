#include "itts/cost_model.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "itts/config.hpp"

namespace itts {

const char* module_name(Module m) {
  switch (m) {
    case Module::Frontend: return "frontend";
    case Module::Encoder: return "encoder";
    case Module::Decoder: return "decoder";
    case Module::Vocoder: return "vocoder";
  }
  return "?";
}

const ModuleCost& CostModel::of(Module m) const {
  switch (m) {
    case Module::Frontend: return frontend;
    case Module::Encoder: return encoder;
    case Module::Decoder: return decoder;
    case Module::Vocoder: return vocoder;
  }
  throw std::invalid_argument("unknown module");
}

double CostModel::charge(Module m, std::size_t batch, std::size_t frame_steps) const {
  return static_cast<double>(frame_steps) * of(m)(batch);
}

CostModel CostModel::defaults() {
  CostModel c;
  c.frontend = {1.0e-3, 0.1e-3};
  c.encoder = {1.0e-3, 0.1e-3};
  c.decoder = {0.3e-3, 0.01e-3};
  c.vocoder = {0.1e-3, 0.005e-3};
  return c;
}

CostModel parse_cost_model(const std::string& text, CostModel base) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!key.starts_with("cost.")) continue;

    const auto dot = key.find('.', 5);
    if (dot == std::string::npos) throw ConfigError("cost: malformed key '" + key + "'");
    const std::string module = key.substr(5, dot - 5);
    const std::string field = key.substr(dot + 1);
    ModuleCost* target = nullptr;
    if (module == "frontend") target = &base.frontend;
    else if (module == "encoder") target = &base.encoder;
    else if (module == "decoder") target = &base.decoder;
    else if (module == "vocoder") target = &base.vocoder;
    else throw ConfigError("cost: unknown module '" + module + "'");

    double ms = 0.0;
    const char* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, ms);
    if (ec != std::errc{} || ptr != end || ms < 0.0) {
      throw ConfigError("cost: bad value for '" + key + "'");
    }
    if (field == "base_ms") target->base_seconds = ms * 1e-3;
    else if (field == "per_item_ms") target->per_item_seconds = ms * 1e-3;
    else throw ConfigError("cost: unknown field '" + field + "'");
  }
  return base;
}

CostModel load_cost_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_cost_model(buf.str());
}

void wait_until(Clock::time_point deadline) {
  constexpr auto kSpin = std::chrono::microseconds(200);
  const auto now = Clock::now();
  if (deadline - now > kSpin) std::this_thread::sleep_until(deadline - kSpin);
  while (Clock::now() < deadline) std::this_thread::yield();
}

}  // namespace itts
