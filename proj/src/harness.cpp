#include "itts/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "itts/baseline.hpp"
#include "itts/channel.hpp"

namespace itts {

TextClass parse_text_class(std::string_view name) {
  if (name == "short") return TextClass::Short;
  if (name == "medium") return TextClass::Medium;
  if (name == "long") return TextClass::Long;
  if (name == "mixed") return TextClass::Mixed;
  throw std::invalid_argument("unknown text class '" + std::string(name) + "'");
}

const char* to_string(TextClass c) {
  switch (c) {
    case TextClass::Short: return "short";
    case TextClass::Medium: return "medium";
    case TextClass::Long: return "long";
    case TextClass::Mixed: return "mixed";
  }
  return "?";
}

TextFixtures TextFixtures::parse(std::string_view tsv) {
  TextFixtures f;
  std::istringstream in{std::string(tsv)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw std::invalid_argument("texts: missing TAB");
    const auto cls = parse_text_class(line.substr(0, tab));
    auto text = line.substr(tab + 1);
    switch (cls) {
      case TextClass::Short: f.short_texts.push_back(std::move(text)); break;
      case TextClass::Medium: f.medium_texts.push_back(std::move(text)); break;
      case TextClass::Long: f.long_texts.push_back(std::move(text)); break;
      case TextClass::Mixed: throw std::invalid_argument("texts: 'mixed' is not a fixture class");
    }
  }
  if (f.short_texts.empty() || f.medium_texts.empty() || f.long_texts.empty()) {
    throw std::invalid_argument("texts: need at least one short, medium and long text");
  }
  return f;
}

TextFixtures TextFixtures::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

const std::vector<std::string>& TextFixtures::of(TextClass c) const {
  switch (c) {
    case TextClass::Short: return short_texts;
    case TextClass::Medium: return medium_texts;
    case TextClass::Long: return long_texts;
    case TextClass::Mixed: break;
  }
  throw std::invalid_argument("TextFixtures::of: mixed has no fixture list");
}

std::vector<TraceEntry> make_trace(const LoadProfile& profile, const TextFixtures& fixtures) {
  if (profile.qps < 1) throw std::invalid_argument("qps must be >= 1");
  if (profile.duration_seconds < 1) throw std::invalid_argument("duration must be >= 1 s");
  std::vector<TraceEntry> trace;
  trace.reserve(static_cast<std::size_t>(profile.qps) *
                static_cast<std::size_t>(profile.duration_seconds));
  const std::uint64_t stream = splitmix64(profile.seed);
  for (int s = 0; s < profile.duration_seconds; ++s) {
    for (int k = 0; k < profile.qps; ++k) {
      TraceEntry e;
      e.index = trace.size();
      e.send_offset = s + static_cast<double>(k) / profile.qps;
      const std::uint64_t draw = splitmix64(stream + 2 * e.index);
      e.text_class = profile.text_class == TextClass::Mixed
                         ? static_cast<TextClass>(draw % 3)
                         : profile.text_class;
      const auto& pool = fixtures.of(e.text_class);
      e.text = pool[splitmix64(stream + 2 * e.index + 1) % pool.size()];
      trace.push_back(std::move(e));
    }
  }
  return trace;
}

void finalize_record(LatencyRecord& r, int sample_rate) {
  r.audio_duration_seconds = static_cast<double>(r.total_samples) / sample_rate;
  r.fcl = r.first_chunk_time - r.send_time;
  r.lcl = r.last_chunk_time - r.send_time;
  r.rtf = r.audio_duration_seconds > 0.0 ? r.lcl / r.audio_duration_seconds : 0.0;
}

PressureResult run_pressure_test(const std::vector<TraceEntry>& trace, Pipeline& pipeline,
                                 const PressureOptions& options) {
  struct Work {
    std::size_t slot;
    StreamHandle handle;
  };
  PressureResult result;
  result.records.resize(trace.size());
  Channel<Work> work;
  const auto origin = Clock::now() + std::chrono::milliseconds(20);
  auto since_origin = [&](Clock::time_point t) { return seconds_between(origin, t); };

  std::vector<std::jthread> clients;
  const std::size_t n_clients = std::max<std::size_t>(1, options.clients);
  for (std::size_t c = 0; c < n_clients; ++c) {
    clients.emplace_back([&] {
      while (auto w = work.pop()) {
        auto& rec = result.records[w->slot];
        bool finished = false;
        while (auto ev = w->handle.next()) {
          const auto now = Clock::now();
          if (auto* chunk = std::get_if<AudioChunk>(&*ev)) {
            if (rec.chunks == 0) rec.first_chunk_time = since_origin(now);
            rec.last_chunk_time = since_origin(now);
            if (chunk->sample_offset != rec.total_samples) {
              rec.error = "non-contiguous sample_offset";
            }
            rec.total_samples += static_cast<std::int64_t>(chunk->samples.size());
            rec.chunks += 1;
          } else if (auto* end = std::get_if<StreamEnd>(&*ev)) {
            if (end->total_samples != rec.total_samples) rec.error = "sample count mismatch";
            finished = true;
          } else {
            rec.error = std::get<StreamError>(*ev).message;
            finished = true;
          }
        }
        if (!finished && rec.error.empty()) rec.error = "stream closed without end marker";
        rec.ok = finished && rec.error.empty() && rec.chunks > 0;
        finalize_record(rec, options.sample_rate);
      }
    });
  }

  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& e = trace[i];
    auto& rec = result.records[i];
    rec.request_index = e.index;
    rec.pipeline = pipeline.tag();
    rec.text_class = e.text_class;
    std::this_thread::sleep_until(origin + to_duration(e.send_offset));
    const auto sent = Clock::now();
    rec.send_time = since_origin(sent);
    try {
      work.push({i, pipeline.submit(e.text)});
    } catch (const std::exception& ex) {
      rec.error = ex.what();
      rec.ok = false;
    }
  }
  work.close();
  clients.clear();  // joins

  for (const auto& r : result.records) {
    if (!r.ok) result.failed.push_back(r.request_index);
  }
  return result;
}

double percentile_nearest_rank(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("percentile of empty set");
  if (!(p > 0.0 && p <= 100.0)) throw std::invalid_argument("percentile outside (0, 100]");
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * values.size()));
  return values[std::max<std::size_t>(rank, 1) - 1];
}

BenchResult run_bench(const BenchSpec& spec, const Lexicon& lexicon,
                      const TextFixtures& fixtures) {
  validate_config(spec.cfg);
  const auto trace = make_trace(spec.profile, fixtures);
  const PressureOptions popts{spec.clients, spec.cfg.sample_rate};
  PressureResult pr;
  if (spec.pipeline == "incremental") {
    SchedulerOptions so;
    so.exec = spec.exec;
    so.on_report = spec.on_report;
    Scheduler sched(lexicon, spec.cfg, spec.cost, so);
    sched.start();
    pr = run_pressure_test(trace, sched, popts);
    sched.stop();
  } else if (spec.pipeline == "baseline") {
    BaselineOptions bo;
    bo.exec = spec.exec;
    BaselineServer base(lexicon, spec.cfg, spec.cost, bo);
    base.start();
    pr = run_pressure_test(trace, base, popts);
    base.stop();
  } else {
    throw std::invalid_argument("unknown pipeline '" + spec.pipeline + "'");
  }
  BenchResult out;
  auto kept = after_warmup(pr.records, spec.warmup_seconds);
  if (kept.empty()) kept = pr.records;  // trace shorter than the warm-up
  out.row = aggregate(kept);
  out.row.text_class = to_string(spec.profile.text_class);
  out.row.overlap_frames = spec.cfg.overlap_frames;
  out.row.qps = spec.profile.qps;
  out.records = std::move(pr.records);
  out.failed = std::move(pr.failed);
  return out;
}

std::vector<LatencyRecord> after_warmup(const std::vector<LatencyRecord>& records,
                                        double warmup_seconds) {
  std::vector<LatencyRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out),
               [&](const LatencyRecord& r) { return r.send_time >= warmup_seconds; });
  return out;
}

SweepRow aggregate(const std::vector<LatencyRecord>& records) {
  if (records.empty()) throw std::invalid_argument("aggregate: no records");
  SweepRow row;
  row.pipeline = records.front().pipeline;
  row.sent = records.size();
  std::vector<double> fcl, lcl;
  double rtf_sum = 0.0;
  for (const auto& r : records) {
    if (!r.ok) continue;
    fcl.push_back(r.fcl);
    lcl.push_back(r.lcl);
    rtf_sum += r.rtf;
  }
  row.completed = fcl.size();
  if (fcl.empty()) return row;
  auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  row.fcl_mean = mean(fcl);
  row.fcl_median = percentile_nearest_rank(fcl, 50);
  row.fcl_p95 = percentile_nearest_rank(fcl, 95);
  row.fcl_p99 = percentile_nearest_rank(fcl, 99);
  row.lcl_mean = mean(lcl);
  row.lcl_median = percentile_nearest_rank(lcl, 50);
  row.lcl_p95 = percentile_nearest_rank(lcl, 95);
  row.lcl_p99 = percentile_nearest_rank(lcl, 99);
  row.rtf_mean = rtf_sum / static_cast<double>(row.completed);
  return row;
}

const char* const kSummaryCsvHeader =
    "pipeline,text_class,overlap,qps,sent,completed,"
    "fcl_mean_ms,fcl_median_ms,fcl_p95_ms,fcl_p99_ms,"
    "lcl_mean_ms,lcl_median_ms,lcl_p95_ms,lcl_p99_ms,rtf_mean";

const char* const kRecordsCsvHeader =
    "request,pipeline,text_class,send_s,first_chunk_s,last_chunk_s,audio_s,"
    "fcl_ms,lcl_ms,rtf,chunks,samples,ok,error";

void write_summary_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << kSummaryCsvHeader << '\n';
  out << std::fixed;
  for (const auto& r : rows) {
    out << r.pipeline << ',' << r.text_class << ',' << r.overlap_frames << ',' << r.qps << ','
        << r.sent << ',' << r.completed << ',' << std::setprecision(3) << r.fcl_mean * 1e3
        << ',' << r.fcl_median * 1e3 << ',' << r.fcl_p95 * 1e3 << ',' << r.fcl_p99 * 1e3 << ','
        << r.lcl_mean * 1e3 << ',' << r.lcl_median * 1e3 << ',' << r.lcl_p95 * 1e3 << ','
        << r.lcl_p99 * 1e3 << ',' << std::setprecision(5) << r.rtf_mean << '\n';
  }
}

void write_records_csv(std::ostream& out, const std::vector<LatencyRecord>& records) {
  out << kRecordsCsvHeader << '\n';
  out << std::fixed;
  for (const auto& r : records) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    out << r.request_index << ',' << r.pipeline << ',' << to_string(r.text_class) << ','
        << std::setprecision(6) << r.send_time << ',' << r.first_chunk_time << ','
        << r.last_chunk_time << ',' << r.audio_duration_seconds << ',' << std::setprecision(3)
        << r.fcl * 1e3 << ',' << r.lcl * 1e3 << ',' << std::setprecision(5) << r.rtf << ','
        << r.chunks << ',' << r.total_samples << ',' << (r.ok ? 1 : 0) << ',' << err << '\n';
  }
}

std::string to_json(const std::vector<SweepRow>& rows, const std::vector<LatencyRecord>& records) {
  nlohmann::json j;
  j["summary"] = nlohmann::json::array();
  for (const auto& r : rows) {
    j["summary"].push_back({{"pipeline", r.pipeline},
                            {"text_class", r.text_class},
                            {"overlap", r.overlap_frames},
                            {"qps", r.qps},
                            {"sent", r.sent},
                            {"completed", r.completed},
                            {"fcl_mean_ms", r.fcl_mean * 1e3},
                            {"fcl_median_ms", r.fcl_median * 1e3},
                            {"fcl_p95_ms", r.fcl_p95 * 1e3},
                            {"fcl_p99_ms", r.fcl_p99 * 1e3},
                            {"lcl_mean_ms", r.lcl_mean * 1e3},
                            {"lcl_median_ms", r.lcl_median * 1e3},
                            {"lcl_p95_ms", r.lcl_p95 * 1e3},
                            {"lcl_p99_ms", r.lcl_p99 * 1e3},
                            {"rtf_mean", r.rtf_mean}});
  }
  j["records"] = nlohmann::json::array();
  for (const auto& r : records) {
    j["records"].push_back({{"request", r.request_index},
                            {"pipeline", r.pipeline},
                            {"text_class", to_string(r.text_class)},
                            {"send_s", r.send_time},
                            {"first_chunk_s", r.first_chunk_time},
                            {"last_chunk_s", r.last_chunk_time},
                            {"audio_s", r.audio_duration_seconds},
                            {"fcl_ms", r.fcl * 1e3},
                            {"lcl_ms", r.lcl * 1e3},
                            {"rtf", r.rtf},
                            {"chunks", r.chunks},
                            {"samples", r.total_samples},
                            {"ok", r.ok},
                            {"error", r.error}});
  }
  return j.dump(2);
}

namespace {

std::string repeat(std::string_view s, int n) {
  std::string out;
  for (int i = 0; i < n; ++i) out += s;
  return out;
}

}  // namespace

ScriptedReplay replay_scripted(const Lexicon& lexicon, PipelineConfig cfg) {
  // "你好" is four phonemes, i.e. one 32-frame chunk at the default rates.
  cfg.chunk_frames = 32;
  cfg.frames_per_phoneme = 8;
  const std::string r1 = repeat("你好", 4), r2 = repeat("你好", 4), r3 = repeat("你好", 5),
                    r4 = repeat("你好", 2);
  ScriptedReplay replay;
  Scheduler* sched_ptr = nullptr;
  SchedulerOptions opts;
  opts.exec = Exec::Serial;
  opts.on_phase = [&](std::size_t step, IterationPhase phase) {
    if (step == 1 && phase == IterationPhase::Admitted) {
      sched_ptr->submit(r2);
      sched_ptr->submit(r3);
      replay.labels.insert(replay.labels.end(), {"R2", "R3"});
    }
    if (step == 5 && phase == IterationPhase::Finished) {
      sched_ptr->submit(r4);
      replay.labels.push_back("R4");
    }
  };
  Scheduler sched(lexicon, cfg, CostModel::zero(), opts);
  sched_ptr = &sched;
  sched.submit(r1);
  replay.labels.push_back("R1");
  while ((sched.pool_size() > 0 || sched.pending() > 0) && replay.reports.size() < 32) {
    replay.reports.push_back(sched.run_iteration());
  }
  return replay;
}

std::string ScriptedReplay::table() const {
  auto names = [&](const std::vector<RequestId>& ids) {
    std::string s;
    for (auto id : ids) {
      if (!s.empty()) s += ",";
      s += labels.at(id - 1);
    }
    return s.empty() ? std::string("-") : s;
  };
  std::ostringstream out;
  out << std::left << std::setw(6) << "step" << std::setw(12) << "F/E batch" << std::setw(16)
      << "D/V batch" << "removed\n";
  for (const auto& r : reports) {
    out << std::setw(6) << r.step_index << std::setw(12) << names(r.frontend_ids)
        << std::setw(16) << names(r.decoder_ids) << names(r.completed_ids) << '\n';
  }
  return out.str();
}

}  // namespace itts
