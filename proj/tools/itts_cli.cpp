// itts: load tests, sweeps, the scripted replay and one-off synthesis.
#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>

#include "itts/config.hpp"
#include "itts/cost_model.hpp"
#include "itts/frontend.hpp"
#include "itts/harness.hpp"
#include "itts/reference.hpp"
#include "itts/scheduler.hpp"
#include "itts/server.hpp"
#include "itts/wav.hpp"

namespace {

struct Common {
  std::string config = std::string(ITTS_DATA_DIR) + "/default.conf";
  std::string lexicon = std::string(ITTS_DATA_DIR) + "/lexicon.tsv";
  std::string texts = std::string(ITTS_DATA_DIR) + "/texts.tsv";
  int overlap = -1;
  bool serial = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "key = value config file")->check(CLI::ExistingFile);
  app->add_option("--lexicon", c.lexicon, "lexicon TSV")->check(CLI::ExistingFile);
  app->add_option("--texts", c.texts, "fixture texts TSV")->check(CLI::ExistingFile);
  app->add_option("--overlap", c.overlap, "overlap frames (overrides config)");
  app->add_flag("--serial", c.serial, "run batch kernels on one thread");
}

itts::PipelineConfig load_cfg(const Common& c) {
  auto cfg = itts::load_config(c.config);
  if (c.overlap >= 0) cfg.overlap_frames = c.overlap;
  itts::validate_config(cfg);
  return cfg;
}

struct BenchArgs {
  int qps = 10;
  int duration = 200;
  std::string text_class = "mixed";
  std::string pipeline = "incremental";
  std::uint64_t seed = 1;
  double warmup = 5.0;
  std::size_t clients = 128;
  std::string out = "bench";
  std::string iteration_log;
};

void add_bench_flags(CLI::App* app, BenchArgs& b, bool with_qps) {
  if (with_qps) app->add_option("--qps", b.qps, "requests per second")->check(CLI::PositiveNumber);
  app->add_option("--duration", b.duration, "test length in seconds")->check(CLI::PositiveNumber);
  app->add_option("--class", b.text_class, "short|medium|long|mixed")
      ->check(CLI::IsMember({"short", "medium", "long", "mixed"}));
  app->add_option("--pipeline", b.pipeline, "incremental|baseline")
      ->check(CLI::IsMember({"incremental", "baseline"}));
  app->add_option("--seed", b.seed, "trace seed");
  app->add_option("--warmup", b.warmup, "seconds excluded from aggregates");
  app->add_option("--clients", b.clients, "virtual clients")->check(CLI::PositiveNumber);
  app->add_option("--out", b.out, "output prefix: <out>.csv, <out>.records.csv, <out>.json");
}

void write_outputs(const std::string& prefix, const std::vector<itts::SweepRow>& rows,
                   const std::vector<itts::LatencyRecord>& records) {
  std::ofstream csv(prefix + ".csv");
  itts::write_summary_csv(csv, rows);
  std::ofstream rec(prefix + ".records.csv");
  itts::write_records_csv(rec, records);
  std::ofstream json(prefix + ".json");
  json << itts::to_json(rows, records) << '\n';
  if (!csv || !rec || !json) throw std::runtime_error("cannot write outputs under " + prefix);
}

void print_row(const itts::SweepRow& r) {
  std::cout << r.pipeline << " class=" << r.text_class << " qps=" << r.qps
            << " ol=" << r.overlap_frames << " completed=" << r.completed << '/' << r.sent
            << " fcl_mean=" << r.fcl_mean * 1e3 << "ms lcl_mean=" << r.lcl_mean * 1e3
            << "ms p99_lcl=" << r.lcl_p99 * 1e3 << "ms rtf=" << r.rtf_mean << '\n';
}

itts::BenchSpec make_spec(const Common& c, const BenchArgs& b) {
  itts::BenchSpec spec;
  spec.profile = {b.qps, b.duration, itts::parse_text_class(b.text_class), b.seed};
  spec.pipeline = b.pipeline;
  spec.cfg = load_cfg(c);
  spec.cost = itts::load_cost_model(c.config);
  spec.exec = c.serial ? itts::Exec::Serial : itts::Exec::Parallel;
  spec.warmup_seconds = b.warmup;
  spec.clients = b.clients;
  return spec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incremental TTS serving engine"};
  app.require_subcommand(1);

  Common common;
  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "one load test at a fixed qps");
  add_common(bench_cmd, common);
  add_bench_flags(bench_cmd, bench, true);
  bench_cmd->add_option("--iteration-log", bench.iteration_log,
                        "NDJSON file of scheduler iterations (incremental only)");

  BenchArgs sweep;
  std::vector<int> qps_list{1, 5, 10, 20, 50, 100};
  std::vector<std::string> sweep_classes;
  std::vector<std::string> sweep_pipelines;
  auto* sweep_cmd = app.add_subcommand("sweep", "load tests over a range of qps");
  add_common(sweep_cmd, common);
  add_bench_flags(sweep_cmd, sweep, false);
  sweep_cmd->add_option("--qps", qps_list, "qps values")->delimiter(',');
  sweep_cmd->add_option("--classes", sweep_classes, "text classes (default: --class)")
      ->delimiter(',');
  sweep_cmd->add_option("--pipelines", sweep_pipelines, "pipelines (default: --pipeline)")
      ->delimiter(',');

  auto* replay_cmd = app.add_subcommand("replay-fig2", "scripted four-request schedule");
  add_common(replay_cmd, common);

  std::string synth_text, synth_out = "out.wav";
  auto* synth_cmd = app.add_subcommand("synth", "synthesize one text to a WAV file");
  add_common(synth_cmd, common);
  synth_cmd->add_option("text", synth_text, "input text")->required();
  synth_cmd->add_option("-o,--out", synth_out, "WAV path");

  std::string host = "127.0.0.1";
  std::uint16_t port = 7070;
  auto* serve_cmd = app.add_subcommand("serve", "TCP streaming server");
  add_common(serve_cmd, common);
  serve_cmd->add_option("--host", host, "bind address");
  serve_cmd->add_option("--port", port, "bind port (0 = ephemeral)");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto lexicon = itts::Lexicon::load(common.lexicon);

    if (*bench_cmd) {
      auto spec = make_spec(common, bench);
      std::ofstream log;
      if (!bench.iteration_log.empty()) {
        log.open(bench.iteration_log);
        spec.on_report = [&log](const itts::IterationReport& r) { log << itts::to_ndjson(r) << '\n'; };
      }
      const auto fixtures = itts::TextFixtures::load(common.texts);
      const auto res = itts::run_bench(spec, lexicon, fixtures);
      write_outputs(bench.out, {res.row}, res.records);
      print_row(res.row);
      if (!res.failed.empty()) {
        std::cerr << res.failed.size() << " request(s) failed\n";
        return 1;
      }
      return 0;
    }

    if (*sweep_cmd) {
      if (sweep_classes.empty()) sweep_classes = {sweep.text_class};
      if (sweep_pipelines.empty()) sweep_pipelines = {sweep.pipeline};
      const auto fixtures = itts::TextFixtures::load(common.texts);
      std::vector<itts::SweepRow> rows;
      std::vector<itts::LatencyRecord> records;
      std::size_t failed = 0;
      for (const auto& pipe : sweep_pipelines) {
        for (const auto& cls : sweep_classes) {
          for (int q : qps_list) {
            auto args = sweep;
            args.pipeline = pipe;
            args.text_class = cls;
            args.qps = q;
            const auto res = itts::run_bench(make_spec(common, args), lexicon, fixtures);
            print_row(res.row);
            rows.push_back(res.row);
            records.insert(records.end(), res.records.begin(), res.records.end());
            failed += res.failed.size();
          }
        }
      }
      write_outputs(sweep.out, rows, records);
      if (failed) {
        std::cerr << failed << " request(s) failed\n";
        return 1;
      }
      return 0;
    }

    if (*replay_cmd) {
      std::cout << itts::replay_scripted(lexicon, load_cfg(common)).table();
      return 0;
    }

    if (*synth_cmd) {
      const auto cfg = load_cfg(common);
      const auto ref = itts::synthesize_reference(synth_text, lexicon, cfg);
      const auto samples = ref.samples();
      itts::write_wav(synth_out, samples, cfg.sample_rate);
      std::cout << synth_out << ": " << ref.frontend.phonemes.size() << " phonemes, "
                << ref.audio_chunks.size() << " chunks, " << samples.size() << " samples ("
                << static_cast<double>(samples.size()) / cfg.sample_rate << " s)\n";
      return 0;
    }

    if (*serve_cmd) {
      const auto cfg = load_cfg(common);
      itts::SchedulerOptions so;
      so.exec = common.serial ? itts::Exec::Serial : itts::Exec::Parallel;
      itts::Scheduler sched(lexicon, cfg, itts::load_cost_model(common.config), so);
      sigset_t set;
      sigemptyset(&set);
      sigaddset(&set, SIGINT);
      sigaddset(&set, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &set, nullptr);  // inherited by every worker thread
      sched.start();
      itts::Server server(sched, cfg.sample_rate);
      server.listen(host, port);
      std::cout << "listening on " << host << ':' << server.port() << std::endl;
      int sig = 0;
      sigwait(&set, &sig);
      server.stop();
      sched.stop();
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
