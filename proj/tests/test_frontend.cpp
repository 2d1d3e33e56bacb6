#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "support.hpp"

#include "itts/frontend.hpp"

using namespace itts;

namespace {

// A:[p1 p2], B:[p3], phrase AB split the same way.
Lexicon ab_lexicon() {
  return Lexicon::parse("A\ta1\nB\tb1\nAB\ta1 b1\n[phones]\na1\tp1 p2\nb1\tp3\n");
}

// Greedy longest match without the window cap, written independently.
G2PResult brute_force_g2p(const std::u32string& text, const Lexicon& lex) {
  G2PResult out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t best = 0;
    for (std::size_t len = 1; pos + len <= text.size(); ++len) {
      if (lex.find_phrase(std::u32string_view(text).substr(pos, len))) best = len;
    }
    if (best == 0) {
      out.phonemes.push_back(kUnkPhoneme);
      out.char_counts.push_back(1);
      ++pos;
      continue;
    }
    for (const auto& syl : *lex.find_phrase(std::u32string_view(text).substr(pos, best))) {
      const auto& ph = lex.phonemes_of(syl);
      out.phonemes.insert(out.phonemes.end(), ph.begin(), ph.end());
      out.char_counts.push_back(static_cast<int>(ph.size()));
    }
    pos += best;
  }
  return out;
}

std::vector<int> flat_map(const std::vector<int>& tokens, const std::vector<int>& counts) {
  std::vector<int> out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    for (int k = 0; k < counts[i]; ++k) out.push_back(tokens[i]);
  }
  return out;
}

}  // namespace

TEST_CASE("g2p on the two-character lexicon") {
  const auto lex = ab_lexicon();
  const auto ab = g2p("AB", lex);
  CHECK(ab.phonemes == std::vector<int>{1, 2, 3});
  CHECK(ab.char_counts == std::vector<int>{2, 1});
  const auto a = g2p("A", lex);
  CHECK(a.phonemes == std::vector<int>{1, 2});
  CHECK(a.char_counts == std::vector<int>{2});
  const auto ax = g2p("AX", lex);
  CHECK(ax.phonemes == std::vector<int>{1, 2, kUnkPhoneme});
  CHECK(ax.char_counts == std::vector<int>{2, 1});
  CHECK_THROWS_WITH_AS(g2p("", lex), "empty input", FrontendError);
}

TEST_CASE("single-entry lexicon") {
  const auto lex = Lexicon::parse("A\ta1\n[phones]\na1\tp1\n");
  const auto r = g2p("A", lex);
  CHECK(r.phonemes == std::vector<int>{1});
  CHECK(r.char_counts == std::vector<int>{1});
}

TEST_CASE("polyphones resolve by phrase context") {
  const auto& lex = testing::fixture_lexicon();
  auto syllables = [&](std::string_view text) {
    std::string s;
    for (int p : g2p(text, lex).phonemes) s += lex.symbol(p) + " ";
    return s;
  };
  CHECK(syllables("银行") == "y in2 h ang2 ");
  CHECK(syllables("行人") == "x ing2 r en2 ");
  CHECK(syllables("长大") == "zh ang3 d a4 ");
  CHECK(syllables("长城") == "ch ang2 ch eng2 ");
}

TEST_CASE("lexicon validation") {
  CHECK_THROWS_AS(Lexicon::parse("AB\ta1 b1\nA\ta1\n[phones]\na1\tp1\nb1\tp2\n"),
                  FrontendError);  // B has no single-character entry
  CHECK_THROWS_AS(Lexicon::parse("A\tq9\n[phones]\na1\tp1\n"), FrontendError);
  CHECK_THROWS_AS(Lexicon::parse("A\ta1\n[phones]\na1\tp1 p2 p3 p4\n"), FrontendError);
  CHECK_THROWS_AS(Lexicon::parse("AB\ta1\nA\ta1\nB\ta1\n[phones]\na1\tp1\n"), FrontendError);
  CHECK_NOTHROW(testing::fixture_lexicon().check());
}

TEST_CASE("invalid UTF-8 is rejected") {
  CHECK_THROWS_AS(decode_utf8("\xff"), FrontendError);
  CHECK_THROWS_AS(decode_utf8("ab\xe4\xbd"), FrontendError);
  CHECK_THROWS_AS(run_frontend("\xc0\x80", testing::fixture_lexicon()), FrontendError);
  CHECK(decode_utf8("你好") == U"你好");
}

TEST_CASE("prosody stand-in") {
  auto p4 = predict_prosody(U"今天很好");
  CHECK(p4.pw == std::vector<int>{0, 1, 0, 1});
  CHECK(p4.pph == std::vector<int>{0, 0, 0, 1});
  CHECK(p4.iph == std::vector<int>{0, 0, 0, 1});
  auto p1 = predict_prosody(U"好");
  CHECK(p1.pw == std::vector<int>{0});
  CHECK(p1.pph == std::vector<int>{0});
  CHECK(p1.iph == std::vector<int>{1});
  auto p5 = predict_prosody(U"今天很好。");
  CHECK(p5.iph == std::vector<int>{0, 0, 0, 0, 1});
  auto mid = predict_prosody(U"你好，我们");
  CHECK(mid.iph == std::vector<int>{0, 0, 1, 0, 1});
}

TEST_CASE("regulate") {
  CHECK(regulate({0, 1}, {2, 1}) == std::vector<int>{0, 0, 1});
  CHECK(regulate({1}, {3}) == std::vector<int>{1, 1, 1});
  CHECK(regulate({0, 1, 0}, {1, 0, 2}) == std::vector<int>{0, 0, 0});
  CHECK_THROWS_AS(regulate({0, 1}, {1}), FrontendError);
  CHECK_THROWS_AS(regulate({0}, {-1}), FrontendError);

  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> tok(0, 1), cnt(0, 3), len(0, 20);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<int> t(static_cast<std::size_t>(len(rng))), c(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
      t[i] = tok(rng);
      c[i] = cnt(rng);
    }
    CHECK(regulate(t, c) == flat_map(t, c));
  }
}

TEST_CASE("run_frontend fixture") {
  const auto fo = run_frontend("银行行人，长大了", testing::fixture_lexicon());
  const FrontendOutput want{
      {18, 37, 8, 38, 29, 39, 35, 36, 0, 32, 41, 42, 43, 0},
      {2, 2, 2, 2, 1, 2, 2, 1},
      {0, 0, 1, 1, 0, 0, 1, 1, 0, 1, 1, 0, 0, 1},
      {0, 0, 0, 0, 0, 0, 1, 1, 0, 0, 0, 0, 0, 1},
      {0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1},
  };
  CHECK(fo == want);
  CHECK_THROWS_AS(run_frontend("", testing::fixture_lexicon()), FrontendError);
}

TEST_CASE("additivity over repeated characters") {
  const auto& lex = testing::fixture_lexicon();
  // 好 maps to two phonemes and takes part in no phrase starting with itself.
  for (int n = 1; n <= 12; ++n) {
    std::string text;
    for (int i = 0; i < n; ++i) text += "好";
    CHECK(run_frontend(text, lex).phonemes.size() == static_cast<std::size_t>(2 * n));
  }
}

TEST_CASE("random texts: g2p matches brute force and invariants hold") {
  const auto& lex = testing::fixture_lexicon();
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const auto text = testing::random_text(rng);
    const auto chars = decode_utf8(text);
    const auto got = g2p(text, lex);
    const auto want = brute_force_g2p(chars, lex);
    CHECK(got.phonemes == want.phonemes);
    CHECK(got.char_counts == want.char_counts);

    const auto fo = run_frontend(text, lex);
    CHECK(fo.char_counts.size() == chars.size());
    int sum = 0;
    for (int c : fo.char_counts) {
      CHECK(c >= 1);
      sum += c;
    }
    CHECK(static_cast<std::size_t>(sum) == fo.phonemes.size());
    CHECK(fo.pw.size() == fo.phonemes.size());
    CHECK(fo.pph.size() == fo.phonemes.size());
    CHECK(fo.iph.size() == fo.phonemes.size());
    for (int p : fo.phonemes) CHECK((p >= 0 && p < lex.vocab_size()));
    CHECK(fo.iph.back() == 1);
  }
}
