#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "itts/acoustic.hpp"
#include "itts/batch.hpp"
#include "itts/cost_model.hpp"
#include "itts/frontend.hpp"
#include "itts/stream.hpp"
#include "itts/vocoder.hpp"

namespace itts {

// One in-flight request. Indicator 0 means the item still needs the
// frontend and encoder; 1 means it is in the decoder/vocoder phase.
struct PoolItem {
  RequestId request_id = 0;
  std::string text;
  std::optional<FrontendOutput> frontend_out;
  std::optional<EncodedFeatures> enc;
  std::optional<DecoderState> dec_state;
  std::optional<VocoderState> voc_state;
  int module_indicator = 0;
  int chunks_emitted = 0;
  Clock::time_point arrival_time;
  std::shared_ptr<ChunkSink> chunk_sink;
};

struct BatchSizes {
  std::size_t frontend = 0;
  std::size_t encoder = 0;
  std::size_t decoder = 0;
  std::size_t vocoder = 0;
  bool operator==(const BatchSizes&) const = default;
};

struct IterationReport {
  std::size_t step_index = 0;
  BatchSizes batch_sizes;
  double step_duration = 0.0;  // seconds
  std::vector<RequestId> completed_ids;
  std::vector<RequestId> failed_ids;
  // Membership of the decoder/vocoder batch, in pool order.
  std::vector<RequestId> decoder_ids;
  std::vector<RequestId> frontend_ids;
};

// One NDJSON line, no trailing newline.
std::string to_ndjson(const IterationReport& r);

// Points inside an iteration where a test or replay script may act.
enum class IterationPhase { Admitted, Finished };

struct SchedulerOptions {
  Exec exec = Exec::Parallel;
  std::chrono::microseconds idle_poll{1000};
  std::function<void(const IterationReport&)> on_report;
  std::function<void(std::size_t step, IterationPhase)> on_phase;
};

// Instant request pool plus the module-wise dynamic batching loop.
//
// submit() may be called from any thread. Everything else that touches pool
// items runs on the loop thread: either the thread started by start(), or
// the caller of run_iteration() when driving the loop by hand.
class Scheduler : public Pipeline {
 public:
  Scheduler(const Lexicon& lexicon, PipelineConfig cfg, CostModel cost,
            SchedulerOptions options = {});
  ~Scheduler() override;

  Scheduler(const Scheduler&) = delete;
  Scheduler& operator=(const Scheduler&) = delete;

  StreamHandle submit(std::string text) override;
  const char* tag() const override { return "incr"; }

  IterationReport run_iteration();

  // Repeats run_iteration until stop is requested, then closes every
  // in-flight stream with a cancellation marker.
  std::vector<IterationReport> run_loop(std::stop_token stop);

  void start();
  // Stops the background loop and returns its reports.
  std::vector<IterationReport> stop();

  // Rejects further submits and cancels anything in flight. Loop thread only.
  void shutdown();

  std::size_t pool_size() const { return items_.size(); }
  std::size_t pending() const;
  std::size_t steps_run() const { return step_; }
  const PipelineConfig& config() const { return cfg_; }
  const PoolItem* find(RequestId id) const;

 private:
  void fail_item(RequestId id, const std::string& message,
                 IterationReport& report);
  void charge(Module m, std::size_t batch, std::size_t frames,
              Clock::time_point started) const;
  void phase(IterationPhase p);

  const Lexicon& lexicon_;
  PipelineConfig cfg_;
  CostModel cost_;
  SchedulerOptions options_;

  mutable std::mutex ingress_mu_;
  std::vector<PoolItem> ingress_;
  bool closed_ = false;
  std::atomic<RequestId> next_id_{1};

  std::map<RequestId, PoolItem> items_;
  std::size_t step_ = 0;

  std::jthread loop_;
  std::vector<IterationReport> loop_reports_;
};

}  // namespace itts
