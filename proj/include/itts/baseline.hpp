#pragma once

#include <deque>
#include <mutex>
#include <thread>
#include <vector>

#include "itts/batch.hpp"
#include "itts/cost_model.hpp"
#include "itts/frontend.hpp"
#include "itts/stream.hpp"

namespace itts {

// What one round did. The batch size is the same for all four modules.
struct Round {
  std::vector<RequestId> batch;
  Clock::time_point round_start;
  Clock::time_point round_end;
  int decode_steps = 0;        // loop length = longest target in the batch
  std::size_t padded_slots = 0;  // decoder slot-steps spent on finished items
  std::vector<RequestId> failed;
};

struct BaselineOptions {
  Exec exec = Exec::Parallel;
  std::size_t max_batch = 64;
  std::chrono::microseconds idle_poll{1000};
};

// Non-incremental twin: requests wait in a queue, each round takes what is
// queued at its start (up to max_batch), synthesizes every utterance in full
// with a fixed batch, and answers with one whole-audio message.
class BaselineServer : public Pipeline {
 public:
  BaselineServer(const Lexicon& lexicon, PipelineConfig cfg, CostModel cost,
                 BaselineOptions options = {});
  ~BaselineServer() override;

  BaselineServer(const BaselineServer&) = delete;
  BaselineServer& operator=(const BaselineServer&) = delete;

  StreamHandle submit(std::string text) override;
  const char* tag() const override { return "non-incr"; }

  // Returns nullopt when the queue is empty.
  std::optional<Round> run_round();
  std::vector<Round> run_loop(std::stop_token stop);

  void start();
  std::vector<Round> stop();
  void shutdown();

  std::size_t queued() const;

 private:
  struct Pending {
    RequestId id;
    std::string text;
    std::shared_ptr<ChunkSink> sink;
  };

  const Lexicon& lexicon_;
  PipelineConfig cfg_;
  CostModel cost_;
  BaselineOptions options_;

  mutable std::mutex mu_;
  std::deque<Pending> queue_;
  bool closed_ = false;
  RequestId next_id_ = 1;

  std::jthread loop_;
  std::vector<Round> loop_rounds_;
};

}  // namespace itts
