#include "itts/baseline.hpp"

#include <algorithm>
#include <map>

namespace itts {

BaselineServer::BaselineServer(const Lexicon& lexicon, PipelineConfig cfg, CostModel cost,
                               BaselineOptions options)
    : lexicon_(lexicon), cfg_(validate_config(cfg)), cost_(cost), options_(options) {
  if (options_.max_batch == 0) throw std::invalid_argument("max_batch must be >= 1");
}

BaselineServer::~BaselineServer() {
  if (loop_.joinable()) stop();
}

StreamHandle BaselineServer::submit(std::string text) {
  if (text.empty()) throw FrontendError("empty input");
  auto sink = std::make_shared<ChunkSink>();
  std::lock_guard lock(mu_);
  if (closed_) throw PoolClosed();
  const RequestId id = next_id_++;
  queue_.push_back({id, std::move(text), sink});
  return {id, sink};
}

std::size_t BaselineServer::queued() const {
  std::lock_guard lock(mu_);
  return queue_.size();
}

std::optional<Round> BaselineServer::run_round() {
  std::vector<Pending> batch;
  {
    std::lock_guard lock(mu_);
    const std::size_t take = std::min(options_.max_batch, queue_.size());
    for (std::size_t i = 0; i < take; ++i) {
      batch.push_back(std::move(queue_.front()));
      queue_.pop_front();
    }
  }
  if (batch.empty()) return std::nullopt;

  Round round;
  round.round_start = Clock::now();
  auto fail = [&](std::size_t index, const std::string& message) {
    batch[index].sink->push(StreamError{message, false});
    batch[index].sink->close();
    round.failed.push_back(batch[index].id);
    batch.erase(batch.begin() + static_cast<std::ptrdiff_t>(index));
  };
  auto charge = [&](Module m, std::size_t frames, Clock::time_point started) {
    const double cost = cost_.charge(m, batch.size(), frames);
    if (cost > 0.0) wait_until(started + to_duration(cost));
  };
  // Drops poisoned items until the kernel runs clean.
  auto retry = [&](auto&& kernel) {
    while (!batch.empty()) {
      try {
        kernel();
        return;
      } catch (const BatchItemError& e) {
        fail(e.index(), e.what());
      }
    }
  };

  auto started = Clock::now();
  std::vector<FrontendOutput> fo;
  retry([&] {
    std::vector<std::string_view> texts;
    for (const auto& p : batch) texts.push_back(p.text);
    fo = frontend_batch(texts, lexicon_, options_.exec);
  });
  charge(Module::Frontend, 1, started);

  started = Clock::now();
  std::vector<EncodedFeatures> enc;
  retry([&] {
    std::vector<const FrontendOutput*> in;
    for (const auto& f : fo) in.push_back(&f);
    try {
      enc = encode_batch(in, cfg_, options_.exec);
    } catch (const BatchItemError& e) {
      fo.erase(fo.begin() + static_cast<std::ptrdiff_t>(e.index()));
      throw;
    }
  });
  charge(Module::Encoder, 1, started);

  // Full-utterance decode. Every slot stays in the batch until the longest
  // item stops, so the cost is charged at full batch size for every step.
  started = Clock::now();
  std::vector<DecoderState> states;
  int longest = 0;
  for (const auto& e : enc) {
    states.push_back(init_decoder_state(e, cfg_));
    longest = std::max(longest, states.back().target_frames);
  }
  DecodeBatchResult dec;
  retry([&] {
    std::vector<DecoderState*> sp;
    std::vector<const EncodedFeatures*> ep;
    for (std::size_t i = 0; i < states.size(); ++i) {
      sp.push_back(&states[i]);
      ep.push_back(&enc[i]);
    }
    try {
      dec = decode_batch(sp, ep, longest, cfg_, options_.exec);
    } catch (const BatchItemError& e) {
      states.erase(states.begin() + static_cast<std::ptrdiff_t>(e.index()));
      enc.erase(enc.begin() + static_cast<std::ptrdiff_t>(e.index()));
      throw;
    }
  });
  round.decode_steps = dec.steps;
  for (const auto& m : dec.mel) {
    round.padded_slots += static_cast<std::size_t>(dec.steps) - m.frame_count();
  }
  charge(Module::Decoder, static_cast<std::size_t>(dec.steps), started);

  started = Clock::now();
  std::vector<const Matrix*> mels;
  std::size_t max_frames = 0;
  for (const auto& m : dec.mel) {
    mels.push_back(&m.frames);
    max_frames = std::max(max_frames, m.frame_count());
  }
  auto audio = generate_batch(mels, cfg_, options_.exec);
  charge(Module::Vocoder, max_frames, started);

  round.round_end = Clock::now();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto total = static_cast<std::int64_t>(audio[i].size());
    batch[i].sink->push(AudioChunk{std::move(audio[i]), 0});
    batch[i].sink->push(StreamEnd{total});
    batch[i].sink->close();
    round.batch.push_back(batch[i].id);
  }
  return round;
}

std::vector<Round> BaselineServer::run_loop(std::stop_token stop) {
  std::vector<Round> rounds;
  while (!stop.stop_requested()) {
    if (auto r = run_round()) {
      rounds.push_back(std::move(*r));
    } else {
      std::this_thread::sleep_for(options_.idle_poll);
    }
  }
  shutdown();
  return rounds;
}

void BaselineServer::start() {
  {
    std::lock_guard lock(mu_);
    closed_ = false;
  }
  loop_ = std::jthread([this](std::stop_token st) { loop_rounds_ = run_loop(st); });
}

std::vector<Round> BaselineServer::stop() {
  if (loop_.joinable()) {
    loop_.request_stop();
    loop_.join();
  }
  return std::move(loop_rounds_);
}

void BaselineServer::shutdown() {
  std::deque<Pending> stranded;
  {
    std::lock_guard lock(mu_);
    closed_ = true;
    stranded.swap(queue_);
  }
  for (auto& p : stranded) {
    p.sink->push(StreamError{"cancelled", true});
    p.sink->close();
  }
}

}  // namespace itts
