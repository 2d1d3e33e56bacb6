#pragma once

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "itts/frontend.hpp"

namespace itts::testing {

inline std::string data_path(const std::string& name) {
  return std::string(ITTS_DATA_DIR) + "/" + name;
}

inline const Lexicon& fixture_lexicon() {
  static const Lexicon lex = Lexicon::load(data_path("lexicon.tsv"));
  return lex;
}

// Single characters and phrases listed in the fixture lexicon, as UTF-8.
inline const std::vector<std::string>& lexicon_entries() {
  static const std::vector<std::string> entries = [] {
    std::vector<std::string> out;
    std::ifstream in(data_path("lexicon.tsv"));
    std::string line;
    while (std::getline(in, line)) {
      if (line == "[phones]") break;
      if (line.empty() || line[0] == '#') continue;
      out.push_back(line.substr(0, line.find('\t')));
    }
    return out;
  }();
  return entries;
}

// Random text drawn from lexicon entries, punctuation and an unknown glyph.
inline std::string random_text(std::mt19937_64& rng, int min_pieces = 1, int max_pieces = 12) {
  const auto& entries = lexicon_entries();
  std::uniform_int_distribution<int> pieces(min_pieces, max_pieces);
  std::uniform_int_distribution<std::size_t> pick(0, entries.size() + 2);
  std::string out;
  const int n = pieces(rng);
  for (int i = 0; i < n; ++i) {
    const auto k = pick(rng);
    if (k < entries.size()) out += entries[k];
    else if (k == entries.size()) out += "，";
    else out += "龘";  // not in the lexicon
  }
  return out;
}

inline void check_close(std::span<const double> got, std::span<const double> want,
                        double tol) {
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    INFO("component " << i);
    CHECK(std::abs(got[i] - want[i]) <= tol);
  }
}

}  // namespace itts::testing
