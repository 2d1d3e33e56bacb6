#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace itts {

class FrontendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Phoneme id reserved for characters the lexicon does not cover.
inline constexpr int kUnkPhoneme = 0;

// Phrase dictionary plus the pinyin -> phoneme mapping table.
//
// TSV layout: `phrase<TAB>pinyin1 pinyin2 ...` lines, then a `[phones]`
// header, then `pinyin<TAB>ph1 ph2 ...` lines. Phoneme symbols get ids in
// order of first appearance starting at 1; id 0 is UNK.
class Lexicon {
 public:
  static Lexicon parse(std::string_view tsv);
  static Lexicon load(const std::filesystem::path& path);

  void add_syllable(const std::string& pinyin,
                    const std::vector<std::string>& phoneme_symbols);
  // One pinyin syllable per character of `phrase` (UTF-8).
  void add_phrase(std::string_view phrase, const std::vector<std::string>& pinyin);

  // Throws FrontendError if a phrase character lacks its own single-char
  // entry or a phrase references an unknown syllable.
  void check() const;

  const std::vector<std::string>* find_phrase(std::u32string_view phrase) const;
  const std::vector<int>& phonemes_of(const std::string& pinyin) const;

  std::size_t max_phrase_len() const { return max_phrase_len_; }
  std::size_t phrase_count() const { return phrases_.size(); }
  int vocab_size() const { return static_cast<int>(symbols_.size()); }
  const std::string& symbol(int id) const { return symbols_.at(static_cast<std::size_t>(id)); }

 private:
  std::unordered_map<std::u32string, std::vector<std::string>> phrases_;
  std::unordered_map<std::string, std::vector<int>> syllables_;
  std::unordered_map<std::string, int> symbol_ids_;
  std::vector<std::string> symbols_{"<unk>"};
  std::size_t max_phrase_len_ = 0;
};

struct G2PResult {
  std::vector<int> phonemes;
  std::vector<int> char_counts;
};

struct ProsodyTokens {
  std::vector<int> pw;
  std::vector<int> pph;
  std::vector<int> iph;
};

struct FrontendOutput {
  std::vector<int> phonemes;
  std::vector<int> char_counts;
  std::vector<int> pw;
  std::vector<int> pph;
  std::vector<int> iph;

  bool operator==(const FrontendOutput&) const = default;
};

// Strict UTF-8 decode; throws FrontendError on malformed input.
std::u32string decode_utf8(std::string_view text);

bool is_punctuation(char32_t c);

// Forward maximum matching: at each position take the longest lexicon
// phrase (capped at max_phrase_len) that prefixes the remaining text.
G2PResult g2p(std::u32string_view text, const Lexicon& lex);
G2PResult g2p(std::string_view utf8_text, const Lexicon& lex);

// Positional prosody stand-in: pw marks every 2nd character, pph every 4th,
// iph the final character and punctuation.
ProsodyTokens predict_prosody(std::u32string_view text);

// Repeats per_char[i] char_counts[i] times.
std::vector<int> regulate(const std::vector<int>& per_char,
                          const std::vector<int>& char_counts);

FrontendOutput run_frontend(std::string_view utf8_text, const Lexicon& lex);

}  // namespace itts
