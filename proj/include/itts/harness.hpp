#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "itts/config.hpp"
#include "itts/cost_model.hpp"
#include "itts/frontend.hpp"
#include "itts/scheduler.hpp"
#include "itts/stream.hpp"

namespace itts {

enum class TextClass { Short, Medium, Long, Mixed };

TextClass parse_text_class(std::string_view name);
const char* to_string(TextClass c);

// Fixture texts per length class (`class<TAB>text` lines).
struct TextFixtures {
  std::vector<std::string> short_texts;
  std::vector<std::string> medium_texts;
  std::vector<std::string> long_texts;

  static TextFixtures parse(std::string_view tsv);
  static TextFixtures load(const std::filesystem::path& path);
  const std::vector<std::string>& of(TextClass c) const;
};

struct LoadProfile {
  int qps = 10;
  int duration_seconds = 200;
  TextClass text_class = TextClass::Mixed;
  std::uint64_t seed = 1;
};

struct TraceEntry {
  std::size_t index = 0;
  double send_offset = 0.0;  // seconds from test start
  TextClass text_class = TextClass::Short;
  std::string text;
};

// Request k of second s is sent at s + k/qps. Mixed picks a class per
// request from a splitmix64 stream keyed by (seed, index).
std::vector<TraceEntry> make_trace(const LoadProfile& profile, const TextFixtures& fixtures);

struct LatencyRecord {
  std::size_t request_index = 0;
  std::string pipeline;
  TextClass text_class = TextClass::Short;
  double send_time = 0.0;         // seconds from test start
  double first_chunk_time = 0.0;
  double last_chunk_time = 0.0;
  double audio_duration_seconds = 0.0;
  double fcl = 0.0;
  double lcl = 0.0;
  double rtf = 0.0;
  std::size_t chunks = 0;
  std::int64_t total_samples = 0;
  bool ok = false;
  std::string error;
};

// Fills fcl/lcl/rtf from the raw timestamps and sample count.
void finalize_record(LatencyRecord& r, int sample_rate);

struct PressureOptions {
  std::size_t clients = 128;
  int sample_rate = 22050;
};

struct PressureResult {
  std::vector<LatencyRecord> records;
  std::vector<std::size_t> failed;
  bool ok() const { return failed.empty(); }
};

// Sends the trace against `pipeline` at its scheduled offsets. A dispatcher
// submits; a fixed pool of virtual clients drains the streams and timestamps
// every received chunk. Returns after every request has finished.
PressureResult run_pressure_test(const std::vector<TraceEntry>& trace, Pipeline& pipeline,
                                 const PressureOptions& options = {});

// Aggregate over records whose send_time >= warmup_seconds.
struct SweepRow {
  std::string pipeline;
  std::string text_class;
  int overlap_frames = 0;
  int qps = 0;
  std::size_t sent = 0;
  std::size_t completed = 0;
  double fcl_mean = 0, fcl_median = 0, fcl_p95 = 0, fcl_p99 = 0;
  double lcl_mean = 0, lcl_median = 0, lcl_p95 = 0, lcl_p99 = 0;
  double rtf_mean = 0;
};

// Nearest-rank percentile (p in (0, 100]) of unsorted values.
double percentile_nearest_rank(std::vector<double> values, double p);

SweepRow aggregate(const std::vector<LatencyRecord>& records);
std::vector<LatencyRecord> after_warmup(const std::vector<LatencyRecord>& records,
                                        double warmup_seconds);

extern const char* const kSummaryCsvHeader;
extern const char* const kRecordsCsvHeader;
void write_summary_csv(std::ostream& out, const std::vector<SweepRow>& rows);
void write_records_csv(std::ostream& out, const std::vector<LatencyRecord>& records);
std::string to_json(const std::vector<SweepRow>& rows,
                    const std::vector<LatencyRecord>& records);

// One load test against an in-process pipeline, end to end.
struct BenchSpec {
  LoadProfile profile;
  std::string pipeline = "incremental";  // or "baseline"
  PipelineConfig cfg;
  CostModel cost = CostModel::defaults();
  Exec exec = Exec::Parallel;
  double warmup_seconds = 5.0;
  std::size_t clients = 128;
  // Receives every iteration report (incremental only).
  std::function<void(const IterationReport&)> on_report;
};

struct BenchResult {
  SweepRow row;  // aggregated after warm-up
  std::vector<LatencyRecord> records;
  std::vector<std::size_t> failed;
};

BenchResult run_bench(const BenchSpec& spec, const Lexicon& lexicon,
                      const TextFixtures& fixtures);

// Scripted four-request scenario with known arrival steps and chunk counts.
struct ScriptedReplay {
  std::vector<IterationReport> reports;
  std::vector<std::string> labels;  // request label per RequestId - 1
  std::string table() const;
};

ScriptedReplay replay_scripted(const Lexicon& lexicon, PipelineConfig cfg);

}  // namespace itts
