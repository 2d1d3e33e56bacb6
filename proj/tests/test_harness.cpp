#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "support.hpp"

#include <json.hpp>
#include <map>

#include "itts/baseline.hpp"
#include "itts/harness.hpp"
#include "itts/latency.hpp"

using namespace itts;

namespace {

const TextFixtures& fixtures() {
  static const TextFixtures f = TextFixtures::load(testing::data_path("texts.tsv"));
  return f;
}

LatencyRecord record(double fcl, double lcl, double audio) {
  LatencyRecord r;
  r.pipeline = "incr";
  r.send_time = 1.0;
  r.first_chunk_time = 1.0 + fcl;
  r.last_chunk_time = 1.0 + lcl;
  r.total_samples = static_cast<std::int64_t>(audio * 22050);
  r.ok = true;
  finalize_record(r, 22050);
  return r;
}

// Smallest value v with at least ceil(p/100 * n) values <= v.
double counting_percentile(const std::vector<double>& v, double p) {
  const auto need = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(v.size())));
  double best = INFINITY;
  for (double cand : v) {
    std::size_t le = 0;
    for (double x : v) le += x <= cand;
    if (le >= need && cand < best) best = cand;
  }
  return best;
}

}  // namespace

TEST_CASE("fixture classes order by length") {
  const auto& lex = testing::fixture_lexicon();
  auto phonemes = [&](const std::string& t) { return run_frontend(t, lex).phonemes.size(); };
  REQUIRE_FALSE(fixtures().short_texts.empty());
  REQUIRE_FALSE(fixtures().medium_texts.empty());
  REQUIRE_FALSE(fixtures().long_texts.empty());
  for (const auto& s : fixtures().short_texts) {
    for (const auto& m : fixtures().medium_texts) {
      CHECK(phonemes(s) < phonemes(m));
      for (const auto& l : fixtures().long_texts) CHECK(phonemes(m) < phonemes(l));
    }
  }
  CHECK_THROWS(fixtures().of(TextClass::Mixed));
}

TEST_CASE("trace spacing") {
  const auto t = make_trace({10, 2, TextClass::Short, 1}, fixtures());
  REQUIRE(t.size() == 20);
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK(t[i].index == i);
    CHECK(t[i].send_offset == doctest::Approx(0.1 * static_cast<double>(i)).epsilon(1e-12));
    CHECK(t[i].text_class == TextClass::Short);
  }
  CHECK_THROWS(make_trace({0, 2, TextClass::Short, 1}, fixtures()));
  CHECK_THROWS(parse_text_class("huge"));
  CHECK(parse_text_class("mixed") == TextClass::Mixed);
}

TEST_CASE("trace determinism") {
  const auto a = make_trace({20, 5, TextClass::Mixed, 7}, fixtures());
  const auto b = make_trace({20, 5, TextClass::Mixed, 7}, fixtures());
  const auto c = make_trace({20, 5, TextClass::Mixed, 8}, fixtures());
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].text == b[i].text);
    CHECK(a[i].text_class == b[i].text_class);
    differs |= a[i].text_class != c[i].text_class;
  }
  CHECK(differs);
}

TEST_CASE("mixed class frequencies") {
  for (std::uint64_t seed = 1; seed <= 7; ++seed) {
    const auto t = make_trace({100, 30, TextClass::Mixed, seed}, fixtures());
    REQUIRE(t.size() == 3000);
    std::map<TextClass, int> counts;
    for (const auto& e : t) counts[e.text_class]++;
    for (auto c : {TextClass::Short, TextClass::Medium, TextClass::Long}) {
      INFO("seed " << seed << " class " << to_string(c));
      CHECK(std::abs(counts[c] / 3000.0 - 1.0 / 3.0) <= 0.05 / 3.0);
    }
  }
}

TEST_CASE("aggregate small cases") {
  const auto row = aggregate({record(0.010, 0.1, 1), record(0.020, 0.2, 1), record(0.030, 0.3, 1)});
  CHECK(row.fcl_mean == doctest::Approx(0.020));
  CHECK(row.fcl_p95 == doctest::Approx(0.030));
  CHECK(row.fcl_median == doctest::Approx(0.020));
  CHECK(row.sent == 3);
  CHECK(row.completed == 3);

  const auto one = aggregate({record(0.05, 0.5, 2)});
  CHECK(one.fcl_mean == one.fcl_p99);
  CHECK(one.lcl_mean == doctest::Approx(0.5));
  CHECK(one.lcl_median == doctest::Approx(0.5));
  CHECK(one.rtf_mean == doctest::Approx(0.25));
  CHECK_THROWS(aggregate({}));
  CHECK_THROWS(percentile_nearest_rank({}, 50));
  CHECK_THROWS(percentile_nearest_rank({1.0}, 0));
}

TEST_CASE("aggregate agrees with an independent recomputation") {
  std::mt19937_64 rng(5);
  std::lognormal_distribution<double> fcl(-3.5, 0.4), extra(-1.5, 0.5);
  std::uniform_real_distribution<double> audio(1.0, 7.0);
  std::vector<LatencyRecord> recs;
  std::vector<double> f, l;
  double rtf = 0;
  for (int i = 0; i < 1000; ++i) {
    const double a = fcl(rng);
    auto r = record(a, a + extra(rng), audio(rng));
    f.push_back(r.fcl);
    l.push_back(r.lcl);
    rtf += r.lcl / r.audio_duration_seconds;
    recs.push_back(r);
  }
  recs[17].ok = false;  // failed records are counted but not aggregated
  f.erase(f.begin() + 17);
  l.erase(l.begin() + 17);
  rtf -= recs[17].lcl / recs[17].audio_duration_seconds;

  const auto row = aggregate(recs);
  CHECK(row.sent == 1000);
  CHECK(row.completed == 999);
  double fs = 0, ls = 0;
  for (double x : f) fs += x;
  for (double x : l) ls += x;
  CHECK(row.fcl_mean == doctest::Approx(fs / 999).epsilon(1e-12));
  CHECK(row.lcl_mean == doctest::Approx(ls / 999).epsilon(1e-12));
  CHECK(row.rtf_mean == doctest::Approx(rtf / 999).epsilon(1e-12));
  CHECK(row.fcl_median == counting_percentile(f, 50));
  CHECK(row.fcl_p95 == counting_percentile(f, 95));
  CHECK(row.fcl_p99 == counting_percentile(f, 99));
  CHECK(row.lcl_median == counting_percentile(l, 50));
  CHECK(row.lcl_p95 == counting_percentile(l, 95));
  CHECK(row.lcl_p99 == counting_percentile(l, 99));
}

TEST_CASE("warm-up filter") {
  std::vector<LatencyRecord> recs(10);
  for (int i = 0; i < 10; ++i) recs[static_cast<std::size_t>(i)].send_time = i * 1.0;
  CHECK(after_warmup(recs, 5.0).size() == 5);
  CHECK(after_warmup(recs, 0.0).size() == 10);
}

TEST_CASE("pressure test records against both pipelines") {
  const auto& lex = testing::fixture_lexicon();
  const auto trace = make_trace({20, 2, TextClass::Mixed, 2}, fixtures());
  Scheduler sched(lex, {}, CostModel::defaults());
  sched.start();
  const auto incr = run_pressure_test(trace, sched);
  sched.stop();
  CHECK(incr.ok());
  REQUIRE(incr.records.size() == trace.size());
  for (const auto& r : incr.records) {
    CHECK(r.ok);
    CHECK(r.fcl > 0.0);
    CHECK(r.fcl <= r.lcl);
    CHECK(r.rtf > 0.0);
    CHECK(r.rtf == r.lcl / r.audio_duration_seconds);
    CHECK(r.chunks >= 1);
    CHECK(r.pipeline == "incr");
  }

  BaselineServer base(lex, {}, CostModel::defaults());
  base.start();
  const auto non = run_pressure_test(trace, base);
  base.stop();
  CHECK(non.ok());
  for (const auto& r : non.records) {
    CHECK(r.fcl == r.lcl);
    CHECK(r.chunks == 1);
  }
  for (std::size_t i = 0; i < trace.size(); ++i) {
    CHECK(non.records[i].total_samples == incr.records[i].total_samples);
  }
}

TEST_CASE("failed requests are reported") {
  const auto& lex = testing::fixture_lexicon();
  std::vector<TraceEntry> trace(3);
  trace[0].text = "你好";
  trace[1].index = 1;
  trace[1].text = "\xff";
  trace[2].index = 2;
  trace[2].text = "今天";
  Scheduler sched(lex, {}, CostModel::zero());
  sched.start();
  const auto res = run_pressure_test(trace, sched);
  sched.stop();
  CHECK(res.failed == std::vector<std::size_t>{1});
  CHECK_FALSE(res.records[1].error.empty());
}

TEST_CASE("sparse arrivals stay inside the latency bounds") {
  // Constant iteration time T; one request at a time so each arrival meets
  // an idle pool and is admitted within one poll interval.
  const double T = 0.010;
  CostModel cm = CostModel::zero();
  cm.decoder.base_seconds = T / 32;
  SchedulerOptions o;
  o.idle_poll = std::chrono::microseconds(500);
  Scheduler sched(testing::fixture_lexicon(), {}, cm, o);
  sched.start();
  std::vector<TraceEntry> trace;
  for (std::size_t i = 0; i < 20; ++i) trace.push_back({i, 0.05 * static_cast<double>(i), TextClass::Short, "你好"});
  const auto res = run_pressure_test(trace, sched);
  sched.stop();
  const auto b = latency_bounds(T, T);
  for (const auto& r : res.records) {
    CHECK(r.fcl >= b.min - 0.0005);
    CHECK(r.fcl <= b.max + 0.002);
  }
}

TEST_CASE("csv and json outputs") {
  SweepRow row;
  row.pipeline = "incr";
  row.text_class = "mixed";
  row.qps = 20;
  row.sent = row.completed = 3;
  std::ostringstream csv;
  write_summary_csv(csv, {row});
  CHECK(csv.str().rfind(std::string(kSummaryCsvHeader) + "\n", 0) == 0);
  CHECK(std::string(kSummaryCsvHeader) ==
        "pipeline,text_class,overlap,qps,sent,completed,fcl_mean_ms,fcl_median_ms,fcl_p95_ms,"
        "fcl_p99_ms,lcl_mean_ms,lcl_median_ms,lcl_p95_ms,lcl_p99_ms,rtf_mean");
  std::ostringstream rec;
  write_records_csv(rec, {record(0.01, 0.1, 1)});
  CHECK(rec.str().rfind(std::string(kRecordsCsvHeader) + "\n", 0) == 0);
  const auto j = nlohmann::json::parse(to_json({row}, {record(0.01, 0.1, 1)}));
  CHECK(j["summary"].size() == 1);
  CHECK(j["summary"][0]["qps"] == 20);
  CHECK(j["records"].size() == 1);
}
