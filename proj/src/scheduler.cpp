#include "itts/scheduler.hpp"

#include <algorithm>
#include <json.hpp>
#include <memory>

namespace itts {

std::string to_ndjson(const IterationReport& r) {
  nlohmann::json j;
  j["step"] = r.step_index;
  j["batch"] = {{"F", r.batch_sizes.frontend},
                {"E", r.batch_sizes.encoder},
                {"D", r.batch_sizes.decoder},
                {"V", r.batch_sizes.vocoder}};
  j["duration_s"] = r.step_duration;
  j["completed"] = r.completed_ids;
  if (!r.failed_ids.empty()) j["failed"] = r.failed_ids;
  return j.dump();
}

Scheduler::Scheduler(const Lexicon& lexicon, PipelineConfig cfg, CostModel cost,
                     SchedulerOptions options)
    : lexicon_(lexicon),
      cfg_(validate_config(cfg)),
      cost_(cost),
      options_(std::move(options)) {}

Scheduler::~Scheduler() {
  if (loop_.joinable()) stop();
}

StreamHandle Scheduler::submit(std::string text) {
  if (text.empty()) throw FrontendError("empty input");
  PoolItem item;
  item.request_id = next_id_.fetch_add(1);
  item.text = std::move(text);
  item.arrival_time = Clock::now();
  item.chunk_sink = std::make_shared<ChunkSink>();
  StreamHandle handle{item.request_id, item.chunk_sink};
  {
    std::lock_guard lock(ingress_mu_);
    if (closed_) throw PoolClosed();
    ingress_.push_back(std::move(item));
  }
  return handle;
}

std::size_t Scheduler::pending() const {
  std::lock_guard lock(ingress_mu_);
  return ingress_.size();
}

const PoolItem* Scheduler::find(RequestId id) const {
  auto it = items_.find(id);
  return it == items_.end() ? nullptr : &it->second;
}

void Scheduler::fail_item(RequestId id, const std::string& message,
                          IterationReport& report) {
  auto it = items_.find(id);
  if (it == items_.end()) return;
  it->second.chunk_sink->push(StreamError{message, false});
  it->second.chunk_sink->close();
  items_.erase(it);
  report.failed_ids.push_back(id);
}

void Scheduler::charge(Module m, std::size_t batch, std::size_t frames,
                       Clock::time_point started) const {
  const double cost = cost_.charge(m, batch, frames);
  if (cost > 0.0) wait_until(started + to_duration(cost));
}

void Scheduler::phase(IterationPhase p) {
  if (options_.on_phase) options_.on_phase(step_, p);
}

namespace {

// Runs `kernel` over `ids`; an item that makes the kernel throw is dropped
// via `fail` and the batch is rerun without it.
template <typename Kernel, typename Fail>
void run_with_retry(std::vector<RequestId>& ids, Kernel&& kernel, Fail&& fail) {
  while (!ids.empty()) {
    try {
      kernel();
      return;
    } catch (const BatchItemError& e) {
      const RequestId bad = ids.at(e.index());
      ids.erase(ids.begin() + static_cast<std::ptrdiff_t>(e.index()));
      fail(bad, e.what());
    }
  }
}

}  // namespace

IterationReport Scheduler::run_iteration() {
  const auto t0 = Clock::now();
  IterationReport report;
  report.step_index = step_;

  // 1. Admission cutoff: everything submitted before this point joins.
  {
    std::lock_guard lock(ingress_mu_);
    for (auto& item : ingress_) {
      const RequestId id = item.request_id;
      items_.emplace(id, std::move(item));
    }
    ingress_.clear();
  }
  phase(IterationPhase::Admitted);

  auto fail = [&](RequestId id, const std::string& msg) { fail_item(id, msg, report); };

  // 2-3. Frontend and encoder over indicator-0 items.
  std::vector<RequestId> fe_ids;
  for (const auto& [id, item] : items_) {
    if (item.module_indicator == 0) fe_ids.push_back(id);
  }
  if (!fe_ids.empty()) {
    auto started = Clock::now();
    std::vector<FrontendOutput> fo;
    run_with_retry(
        fe_ids,
        [&] {
          std::vector<std::string_view> texts;
          for (auto id : fe_ids) texts.push_back(items_.at(id).text);
          fo = frontend_batch(texts, lexicon_, options_.exec);
        },
        fail);
    for (std::size_t i = 0; i < fe_ids.size(); ++i) {
      items_.at(fe_ids[i]).frontend_out = std::move(fo[i]);
    }
    charge(Module::Frontend, fe_ids.size(), 1, started);
    report.batch_sizes.frontend = fe_ids.size();

    started = Clock::now();
    std::vector<EncodedFeatures> enc;
    run_with_retry(
        fe_ids,
        [&] {
          std::vector<const FrontendOutput*> in;
          for (auto id : fe_ids) in.push_back(&*items_.at(id).frontend_out);
          enc = encode_batch(in, cfg_, options_.exec);
        },
        fail);
    for (std::size_t i = 0; i < fe_ids.size(); ++i) {
      auto& item = items_.at(fe_ids[i]);
      item.enc = std::move(enc[i]);
      item.dec_state = init_decoder_state(*item.enc, cfg_);
      item.voc_state = VocoderState{};
      item.module_indicator = 1;
    }
    charge(Module::Encoder, fe_ids.size(), 1, started);
    report.batch_sizes.encoder = fe_ids.size();
  }
  report.frontend_ids = fe_ids;

  // 4. Decoder over indicator-1 items.
  std::vector<RequestId> dv_ids;
  for (const auto& [id, item] : items_) {
    if (item.module_indicator == 1) dv_ids.push_back(id);
  }
  if (!dv_ids.empty()) {
    auto started = Clock::now();
    DecodeBatchResult dec;
    run_with_retry(
        dv_ids,
        [&] {
          std::vector<DecoderState*> states;
          std::vector<const EncodedFeatures*> encs;
          for (auto id : dv_ids) {
            auto& item = items_.at(id);
            states.push_back(&*item.dec_state);
            encs.push_back(&*item.enc);
          }
          dec = decode_batch(states, encs, cfg_.chunk_frames, cfg_, options_.exec);
        },
        fail);
    std::map<RequestId, std::pair<MelChunk, bool>> decoded;
    for (std::size_t i = 0; i < dv_ids.size(); ++i) {
      decoded.emplace(dv_ids[i], std::make_pair(std::move(dec.mel[i]), bool(dec.stop[i])));
    }
    charge(Module::Decoder, dv_ids.size(), static_cast<std::size_t>(dec.steps), started);
    report.batch_sizes.decoder = dv_ids.size();

    // 5. Vocoder over the same items; the stop flag marks the final chunk.
    started = Clock::now();
    std::vector<VocodeResult> voc;
    std::size_t max_frames = 0;
    run_with_retry(
        dv_ids,
        [&] {
          std::vector<const VocoderState*> states;
          std::vector<const MelChunk*> chunks;
          auto last = std::make_unique<bool[]>(dv_ids.size());
          max_frames = 0;
          for (std::size_t i = 0; i < dv_ids.size(); ++i) {
            const auto& item = items_.at(dv_ids[i]);
            const auto& [chunk, stopped] = decoded.at(dv_ids[i]);
            states.push_back(&*item.voc_state);
            chunks.push_back(&chunk);
            last[i] = stopped;
            max_frames = std::max(max_frames, item.voc_state->mel_tail.rows + chunk.frame_count());
          }
          voc = vocode_batch(states, chunks, std::span<const bool>(last.get(), dv_ids.size()),
                             cfg_, options_.exec);
        },
        fail);
    charge(Module::Vocoder, dv_ids.size(), max_frames, started);
    report.batch_sizes.vocoder = dv_ids.size();

    for (std::size_t i = 0; i < dv_ids.size(); ++i) {
      auto& item = items_.at(dv_ids[i]);
      item.voc_state = std::move(voc[i].new_state);
      item.chunk_sink->push(std::move(voc[i].emit));
      item.chunks_emitted += 1;
    }

    // 6. Immediate removal of finished requests.
    for (std::size_t i = 0; i < dv_ids.size(); ++i) {
      if (!decoded.at(dv_ids[i]).second) continue;
      auto it = items_.find(dv_ids[i]);
      it->second.chunk_sink->push(StreamEnd{it->second.voc_state->samples_emitted});
      it->second.chunk_sink->close();
      report.completed_ids.push_back(dv_ids[i]);
      items_.erase(it);
    }
  }
  report.decoder_ids = dv_ids;

  report.step_duration = seconds_between(t0, Clock::now());
  phase(IterationPhase::Finished);
  ++step_;
  if (options_.on_report) options_.on_report(report);
  return report;
}

std::vector<IterationReport> Scheduler::run_loop(std::stop_token stop) {
  std::vector<IterationReport> reports;
  while (!stop.stop_requested()) {
    if (items_.empty() && pending() == 0) {
      std::this_thread::sleep_for(options_.idle_poll);
      continue;
    }
    reports.push_back(run_iteration());
  }
  shutdown();
  return reports;
}

void Scheduler::start() {
  {
    std::lock_guard lock(ingress_mu_);
    closed_ = false;
  }
  loop_ = std::jthread([this](std::stop_token st) { loop_reports_ = run_loop(st); });
}

std::vector<IterationReport> Scheduler::stop() {
  if (loop_.joinable()) {
    loop_.request_stop();
    loop_.join();
  }
  return std::move(loop_reports_);
}

void Scheduler::shutdown() {
  std::vector<PoolItem> stranded;
  {
    std::lock_guard lock(ingress_mu_);
    closed_ = true;
    stranded.swap(ingress_);
  }
  auto cancel = [](PoolItem& item) {
    item.chunk_sink->push(StreamError{"cancelled", true});
    item.chunk_sink->close();
  };
  for (auto& item : stranded) cancel(item);
  for (auto& [id, item] : items_) cancel(item);
  items_.clear();
}

}  // namespace itts
