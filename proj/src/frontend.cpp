#include "itts/frontend.hpp"

#include <algorithm>
#include <boost/locale/utf.hpp>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace itts {
namespace {

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::string_view strip_cr(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::u32string decode_utf8(std::string_view text) {
  using traits = boost::locale::utf::utf_traits<char>;
  std::u32string out;
  out.reserve(text.size());
  const char* p = text.data();
  const char* const end = p + text.size();
  while (p != end) {
    const auto offset = p - text.data();
    const auto cp = traits::decode(p, end);
    if (cp == boost::locale::utf::illegal || cp == boost::locale::utf::incomplete) {
      throw FrontendError("invalid UTF-8 at byte " + std::to_string(offset));
    }
    out.push_back(static_cast<char32_t>(cp));
  }
  return out;
}

bool is_punctuation(char32_t c) {
  if (c < 0x80) {
    return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) ||
           (c >= 0x5B && c <= 0x60) || (c >= 0x7B && c <= 0x7E);
  }
  // CJK symbols and punctuation, general punctuation, fullwidth ASCII punct.
  return (c >= 0x3000 && c <= 0x303F) || (c >= 0x2010 && c <= 0x2027) ||
         (c >= 0xFF01 && c <= 0xFF0F) || (c >= 0xFF1A && c <= 0xFF20) ||
         (c >= 0xFF3B && c <= 0xFF40) || (c >= 0xFF5B && c <= 0xFF65);
}

Lexicon Lexicon::parse(std::string_view tsv) {
  Lexicon lex;
  // Phrases may reference syllables defined later, so collect first.
  std::vector<std::pair<std::string, std::vector<std::string>>> phrases;
  bool in_phones = false;
  std::size_t lineno = 0;
  std::istringstream in{std::string(tsv)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = strip_cr(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line == "[phones]") {
      in_phones = true;
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw FrontendError("lexicon line " + std::to_string(lineno) + ": missing TAB");
    }
    auto key = std::string(line.substr(0, tab));
    auto fields = split_ws(line.substr(tab + 1));
    if (fields.empty()) {
      throw FrontendError("lexicon line " + std::to_string(lineno) + ": empty entry");
    }
    if (in_phones) {
      lex.add_syllable(key, fields);
    } else {
      phrases.emplace_back(std::move(key), std::move(fields));
    }
  }
  for (const auto& [phrase, pinyin] : phrases) lex.add_phrase(phrase, pinyin);
  lex.check();
  return lex;
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FrontendError("cannot open lexicon " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void Lexicon::add_syllable(const std::string& pinyin,
                           const std::vector<std::string>& phoneme_symbols) {
  if (phoneme_symbols.empty() || phoneme_symbols.size() > 3) {
    throw FrontendError("syllable '" + pinyin + "' must map to 1-3 phonemes");
  }
  std::vector<int> ids;
  for (const auto& sym : phoneme_symbols) {
    auto [it, inserted] = symbol_ids_.try_emplace(sym, vocab_size());
    if (inserted) symbols_.push_back(sym);
    ids.push_back(it->second);
  }
  syllables_[pinyin] = std::move(ids);
}

void Lexicon::add_phrase(std::string_view phrase, const std::vector<std::string>& pinyin) {
  auto chars = decode_utf8(phrase);
  if (chars.empty()) throw FrontendError("empty lexicon phrase");
  if (chars.size() != pinyin.size()) {
    throw FrontendError("phrase '" + std::string(phrase) +
                        "' needs one pinyin syllable per character");
  }
  max_phrase_len_ = std::max(max_phrase_len_, chars.size());
  phrases_[std::move(chars)] = pinyin;
}

void Lexicon::check() const {
  for (const auto& [phrase, pinyin] : phrases_) {
    for (std::size_t i = 0; i < phrase.size(); ++i) {
      if (!phrases_.contains(std::u32string(1, phrase[i]))) {
        char hex[16];
        std::snprintf(hex, sizeof hex, "U+%04X", static_cast<unsigned>(phrase[i]));
        throw FrontendError(std::string("lexicon: character ") + hex +
                            " has no single-character entry");
      }
      if (!syllables_.contains(pinyin[i])) {
        throw FrontendError("lexicon: unknown syllable '" + pinyin[i] + "'");
      }
    }
  }
}

const std::vector<std::string>* Lexicon::find_phrase(std::u32string_view phrase) const {
  auto it = phrases_.find(std::u32string(phrase));
  return it == phrases_.end() ? nullptr : &it->second;
}

const std::vector<int>& Lexicon::phonemes_of(const std::string& pinyin) const {
  auto it = syllables_.find(pinyin);
  if (it == syllables_.end()) throw FrontendError("unknown syllable '" + pinyin + "'");
  return it->second;
}

G2PResult g2p(std::u32string_view text, const Lexicon& lex) {
  if (text.empty()) throw FrontendError("empty input");
  G2PResult out;
  out.char_counts.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t window = std::min(lex.max_phrase_len(), text.size() - pos);
    std::size_t matched = 0;
    for (std::size_t len = window; len >= 1; --len) {
      if (const auto* pinyin = lex.find_phrase(text.substr(pos, len))) {
        for (const auto& syl : *pinyin) {
          const auto& ph = lex.phonemes_of(syl);
          out.phonemes.insert(out.phonemes.end(), ph.begin(), ph.end());
          out.char_counts.push_back(static_cast<int>(ph.size()));
        }
        matched = len;
        break;
      }
    }
    if (matched == 0) {
      out.phonemes.push_back(kUnkPhoneme);
      out.char_counts.push_back(1);
      matched = 1;
    }
    pos += matched;
  }
  return out;
}

G2PResult g2p(std::string_view utf8_text, const Lexicon& lex) {
  return g2p(std::u32string_view(decode_utf8(utf8_text)), lex);
}

ProsodyTokens predict_prosody(std::u32string_view text) {
  if (text.empty()) throw FrontendError("empty input");
  const std::size_t n = text.size();
  ProsodyTokens out{std::vector<int>(n), std::vector<int>(n), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    out.pw[i] = (i + 1) % 2 == 0 ? 1 : 0;
    out.pph[i] = (i + 1) % 4 == 0 ? 1 : 0;
    out.iph[i] = (i + 1 == n || is_punctuation(text[i])) ? 1 : 0;
  }
  return out;
}

std::vector<int> regulate(const std::vector<int>& per_char,
                          const std::vector<int>& char_counts) {
  if (per_char.size() != char_counts.size()) {
    throw FrontendError("regulate: " + std::to_string(per_char.size()) +
                        " tokens vs " + std::to_string(char_counts.size()) + " counts");
  }
  if (std::any_of(char_counts.begin(), char_counts.end(), [](int c) { return c < 0; })) {
    throw FrontendError("regulate: negative count");
  }
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(
      std::accumulate(char_counts.begin(), char_counts.end(), 0)));
  for (std::size_t i = 0; i < per_char.size(); ++i) {
    out.insert(out.end(), static_cast<std::size_t>(char_counts[i]), per_char[i]);
  }
  return out;
}

FrontendOutput run_frontend(std::string_view utf8_text, const Lexicon& lex) {
  const auto chars = decode_utf8(utf8_text);
  auto g = g2p(std::u32string_view(chars), lex);
  auto prosody = predict_prosody(chars);
  FrontendOutput out;
  out.pw = regulate(prosody.pw, g.char_counts);
  out.pph = regulate(prosody.pph, g.char_counts);
  out.iph = regulate(prosody.iph, g.char_counts);
  out.phonemes = std::move(g.phonemes);
  out.char_counts = std::move(g.char_counts);
  return out;
}

}  // namespace itts
