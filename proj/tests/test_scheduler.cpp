#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "support.hpp"

#include <json.hpp>
#include <thread>

#include "itts/harness.hpp"
#include "itts/reference.hpp"
#include "itts/scheduler.hpp"

using namespace itts;

namespace {

const Lexicon& lex() { return testing::fixture_lexicon(); }

std::string repeat(const std::string& s, int n) {
  std::string out;
  for (int i = 0; i < n; ++i) out += s;
  return out;
}

SchedulerOptions serial() {
  SchedulerOptions o;
  o.exec = Exec::Serial;
  return o;
}

std::vector<StreamEvent> drain_now(const StreamHandle& h) {
  std::vector<StreamEvent> out;
  while (auto ev = h.sink->try_pop()) out.push_back(std::move(*ev));
  return out;
}

// Blocks until the stream closes; returns the samples and checks the framing.
std::vector<double> collect(const StreamHandle& h) {
  std::vector<double> samples;
  bool ended = false;
  while (auto ev = h.next()) {
    REQUIRE_FALSE(ended);  // nothing after the end marker
    if (auto* c = std::get_if<AudioChunk>(&*ev)) {
      CHECK(c->sample_offset == static_cast<std::int64_t>(samples.size()));
      samples.insert(samples.end(), c->samples.begin(), c->samples.end());
    } else if (auto* e = std::get_if<StreamEnd>(&*ev)) {
      CHECK(e->total_samples == static_cast<std::int64_t>(samples.size()));
      ended = true;
    } else {
      FAIL("stream error: " << std::get<StreamError>(*ev).message);
    }
  }
  CHECK(ended);
  return samples;
}

}  // namespace

TEST_CASE("empty pool iteration") {
  Scheduler s(lex(), {}, CostModel::zero(), serial());
  const auto r = s.run_iteration();
  CHECK(r.batch_sizes == BatchSizes{0, 0, 0, 0});
  CHECK(r.completed_ids.empty());
}

TEST_CASE("submit into an idle pool is processed in the next iteration") {
  Scheduler s(lex(), {}, CostModel::zero(), serial());
  const auto h = s.submit("你好你好");
  CHECK(s.pending() == 1);
  const auto r = s.run_iteration();
  CHECK(r.batch_sizes == BatchSizes{1, 1, 1, 1});
  const auto events = drain_now(h);
  REQUIRE(events.size() == 1);  // first of two chunks
  CHECK(std::holds_alternative<AudioChunk>(events[0]));
}

TEST_CASE("100 submits land in one frontend batch") {
  Scheduler s(lex(), {}, CostModel::zero(), serial());
  for (int i = 0; i < 100; ++i) s.submit(repeat("今天", 1 + i % 9));
  const auto r = s.run_iteration();
  CHECK(r.batch_sizes.frontend == 100);
  CHECK(r.batch_sizes.encoder == 100);
  CHECK(r.batch_sizes.decoder == 100);
}

TEST_CASE("indicator partition") {
  Scheduler s(lex(), {}, CostModel::zero(), serial());
  for (int i = 0; i < 3; ++i) s.submit(repeat("你好", 4));
  CHECK(s.run_iteration().batch_sizes == BatchSizes{3, 3, 3, 3});
  CHECK(s.run_iteration().batch_sizes == BatchSizes{0, 0, 3, 3});
  for (const auto& [id, item] : std::map<RequestId, int>{{1, 0}, {2, 0}, {3, 0}}) {
    REQUIRE(s.find(id) != nullptr);
    CHECK(s.find(id)->module_indicator == 1);
    CHECK(s.find(id)->chunks_emitted == 2);
  }
}

TEST_CASE("a submit during an iteration waits for the next one") {
  Scheduler* self = nullptr;
  std::optional<StreamHandle> late;
  SchedulerOptions o = serial();
  o.on_phase = [&](std::size_t step, IterationPhase p) {
    if (step == 0 && p == IterationPhase::Admitted) late = self->submit("你好");
  };
  Scheduler s(lex(), {}, CostModel::zero(), o);
  self = &s;
  s.submit(repeat("你好", 3));
  const auto r0 = s.run_iteration();
  CHECK(r0.batch_sizes.frontend == 1);
  CHECK(drain_now(*late).empty());
  const auto r1 = s.run_iteration();
  CHECK(r1.frontend_ids == std::vector<RequestId>{late->id});
  CHECK(r1.decoder_ids == std::vector<RequestId>{1, late->id});
}

TEST_CASE("two-chunk request is touched by exactly two iterations") {
  Scheduler s(lex(), {}, CostModel::zero(), serial());
  const auto h = s.submit("你好你好你");
  int touched = 0;
  while (s.pool_size() + s.pending() > 0) {
    const auto r = s.run_iteration();
    if (std::find(r.decoder_ids.begin(), r.decoder_ids.end(), h.id) != r.decoder_ids.end()) {
      ++touched;
      if (touched == 1) {
        const auto ev = drain_now(h);
        REQUIRE(ev.size() == 1);
        CHECK(std::holds_alternative<AudioChunk>(ev[0]));
      }
    }
  }
  const auto frames = 8 * run_frontend("你好你好你", lex()).phonemes.size();
  CHECK(touched == static_cast<int>((frames + 31) / 32));
}

TEST_CASE("chunk counts follow the phoneme count") {
  for (int n = 1; n <= 6; ++n) {
    Scheduler s(lex(), {}, CostModel::zero(), serial());
    const auto h = s.submit(repeat("你好", n));  // 4n phonemes, 32n frames: n chunks
    int iters = 0;
    while (s.pool_size() + s.pending() > 0) {
      s.run_iteration();
      ++iters;
    }
    CHECK(iters == n);
    int chunks = 0;
    for (auto& ev : drain_now(h)) chunks += std::holds_alternative<AudioChunk>(ev);
    CHECK(chunks == n);
  }
}

TEST_CASE("scripted four-request schedule") {
  const auto replay = replay_scripted(lex(), {});
  auto names = [&](const std::vector<RequestId>& ids) {
    std::vector<std::string> out;
    for (auto id : ids) out.push_back(replay.labels.at(id - 1));
    return out;
  };
  using V = std::vector<std::string>;
  const std::vector<V> decoder = {{"R1"},       {"R1"},       {"R1", "R2", "R3"},
                                  {"R1", "R2", "R3"}, {"R2", "R3"}, {"R2", "R3"},
                                  {"R3", "R4"}, {"R4"}};
  const std::vector<V> removed = {{}, {}, {}, {"R1"}, {}, {"R2"}, {"R3"}, {"R4"}};
  const std::vector<V> frontend = {{"R1"}, {}, {"R2", "R3"}, {}, {}, {}, {"R4"}, {}};
  REQUIRE(replay.reports.size() == 8);
  for (std::size_t t = 0; t < 8; ++t) {
    INFO("step " << t);
    CHECK(names(replay.reports[t].decoder_ids) == decoder[t]);
    CHECK(names(replay.reports[t].completed_ids) == removed[t]);
    CHECK(names(replay.reports[t].frontend_ids) == frontend[t]);
    CHECK(replay.reports[t].batch_sizes.decoder == replay.reports[t].batch_sizes.vocoder);
  }
  CHECK(replay.table().find("R1,R2,R3") != std::string::npos);
}

TEST_CASE("a poisoned item fails alone") {
  Scheduler s(lex(), {}, CostModel::zero(), serial());
  const auto good1 = s.submit("你好");
  const auto bad = s.submit("\xe4\xbd");  // truncated UTF-8
  const auto good2 = s.submit("今天天气");
  const auto r = s.run_iteration();
  CHECK(r.failed_ids == std::vector<RequestId>{bad.id});
  CHECK(r.batch_sizes == BatchSizes{2, 2, 2, 2});
  const auto ev = drain_now(bad);
  REQUIRE(ev.size() == 1);
  CHECK(std::get<StreamError>(ev[0]).message.find("UTF-8") != std::string::npos);
  CHECK(bad.sink->closed());
  while (s.pool_size() > 0) s.run_iteration();
  CHECK(collect(good1) == synthesize_reference("你好", lex(), {}).samples());
  CHECK(collect(good2) == synthesize_reference("今天天气", lex(), {}).samples());
}

TEST_CASE("submit contract") {
  Scheduler s(lex(), {}, CostModel::zero(), serial());
  CHECK_THROWS_AS(s.submit(""), FrontendError);
  s.shutdown();
  CHECK_THROWS_AS(s.submit("你好"), PoolClosed);
}

TEST_CASE("stopping mid-flight cancels open streams") {
  CostModel slow = CostModel::zero();
  slow.decoder.base_seconds = 0.001;  // 32 ms per iteration
  Scheduler s(lex(), {}, slow, serial());
  s.start();
  const auto h = s.submit(repeat("你好", 20));
  std::this_thread::sleep_for(std::chrono::milliseconds(80));
  s.stop();
  bool cancelled = false;
  std::size_t chunks = 0;
  while (auto ev = h.next()) {
    if (std::holds_alternative<AudioChunk>(*ev)) ++chunks;
    if (auto* e = std::get_if<StreamError>(&*ev)) cancelled = e->cancelled;
  }
  CHECK(chunks >= 1);
  CHECK(chunks < 20);
  CHECK(cancelled);
}

TEST_CASE("steady arrivals keep D and V equal") {
  Scheduler s(lex(), {}, CostModel::zero(), serial());
  std::mt19937_64 rng(3);
  for (int t = 0; t < 60; ++t) {
    s.submit(testing::random_text(rng, 1, 10));
    const auto r = s.run_iteration();
    CHECK(r.batch_sizes.decoder == r.batch_sizes.vocoder);
    CHECK(r.batch_sizes.frontend == r.batch_sizes.encoder);
    CHECK(r.batch_sizes.frontend == 1);
  }
}

TEST_CASE("concurrent submitters get reference-identical streams") {
  SchedulerOptions o;
  o.exec = Exec::Parallel;
  Scheduler s(lex(), {}, CostModel::zero(), o);
  s.start();
  std::vector<std::string> texts;
  std::mt19937_64 rng(99);
  for (int i = 0; i < 120; ++i) texts.push_back(testing::random_text(rng, 1, 16));
  std::vector<StreamHandle> handles(texts.size());
  {
    std::vector<std::jthread> producers;
    for (int p = 0; p < 4; ++p) {
      producers.emplace_back([&, p] {
        for (std::size_t i = static_cast<std::size_t>(p); i < texts.size(); i += 4) {
          handles[i] = s.submit(texts[i]);
          std::this_thread::sleep_for(std::chrono::microseconds(200));
        }
      });
    }
  }
  for (std::size_t i = 0; i < texts.size(); ++i) {
    CHECK(collect(handles[i]) == synthesize_reference(texts[i], lex(), {}).samples());
  }
  const auto reports = s.stop();
  std::size_t completed = 0;
  for (const auto& r : reports) completed += r.completed_ids.size();
  CHECK(completed == texts.size());
}

TEST_CASE("iteration report serializes to one JSON line") {
  IterationReport r;
  r.step_index = 4;
  r.batch_sizes = {1, 1, 3, 3};
  r.completed_ids = {7};
  const auto line = to_ndjson(r);
  CHECK(line.find('\n') == std::string::npos);
  const auto j = nlohmann::json::parse(line);
  CHECK(j["step"] == 4);
  CHECK(j["batch"]["D"] == 3);
  CHECK(j["completed"][0] == 7);
}
