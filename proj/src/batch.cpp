#include "itts/batch.hpp"

#include <algorithm>
#include <exception>

#include "recurrence.hpp"

namespace itts {
namespace {

// Rethrows the first per-item failure as a BatchItemError.
void raise_first(const std::vector<std::exception_ptr>& errors) {
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      throw BatchItemError(i, e.what());
    }
  }
}

template <typename Fn>
void for_each_item(std::size_t n, Exec exec, std::vector<std::exception_ptr>& errors,
                   Fn&& fn) {
  errors.assign(n, nullptr);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic) if (exec == Exec::Parallel && count > 1)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    try {
      fn(idx);
    } catch (...) {
      errors[idx] = std::current_exception();
    }
  }
  raise_first(errors);
}

}  // namespace

std::vector<FrontendOutput> frontend_batch(std::span<const std::string_view> texts,
                                           const Lexicon& lex, Exec exec) {
  std::vector<FrontendOutput> out(texts.size());
  std::vector<std::exception_ptr> errors;
  for_each_item(texts.size(), exec, errors,
                [&](std::size_t i) { out[i] = run_frontend(texts[i], lex); });
  return out;
}

std::vector<EncodedFeatures> encode_batch(std::span<const FrontendOutput* const> items,
                                          const PipelineConfig& cfg, Exec exec) {
  const std::size_t n = items.size();
  const auto dim = static_cast<std::size_t>(cfg.feature_dim);
  std::size_t max_len = 0;
  for (const auto* fo : items) max_len = std::max(max_len, fo->phonemes.size());

  // Padded embedding batch: n x max_len x dim.
  std::vector<double> e_all(n * max_len * dim, 0.0);
  std::vector<std::exception_ptr> errors;
  for_each_item(n, exec, errors, [&](std::size_t i) {
    const Matrix e = embed(*items[i], cfg);
    std::copy(e.data.begin(), e.data.end(),
              e_all.begin() + static_cast<std::ptrdiff_t>(i * max_len * dim));
  });

  std::vector<EncodedFeatures> out(n);
  for_each_item(n, exec, errors, [&](std::size_t i) {
    const std::size_t len = items[i]->phonemes.size();
    const std::span<const double> rows(e_all.data() + i * max_len * dim, len * dim);
    out[i].rows = Matrix(len, dim);
    for (std::size_t t = 0; t < len; ++t) {
      detail::encode_row(rows, len, dim, t, out[i].rows.row(t));
    }
  });
  return out;
}

DecodeBatchResult decode_batch(std::span<DecoderState* const> states,
                               std::span<const EncodedFeatures* const> encs,
                               int max_steps, const PipelineConfig& cfg, Exec exec) {
  if (states.size() != encs.size()) {
    throw std::invalid_argument("decode_batch: states/encoder count mismatch");
  }
  const std::size_t n = states.size();
  const auto dim = static_cast<std::size_t>(cfg.feature_dim);
  const auto steps_cap = static_cast<std::size_t>(std::max(max_steps, 0));
  std::vector<std::exception_ptr> errors(n);

  // Gather. Validation happens here so a bad item never reaches the kernel.
  std::size_t max_len = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = *states[i];
    const auto& e = *encs[i];
    try {
      if (s.stopped()) throw AcousticError("decode past stop");
      if (e.rows.cols != dim || s.m_last.size() != dim || s.context.size() != dim ||
          s.h_att.size() != dim || s.c_att.size() != dim || s.h_dec.size() != dim ||
          s.c_dec.size() != dim) {
        throw AcousticError("decoder: feature_dim mismatch between state and encoder");
      }
      if (s.w_last.size() != e.seq_len() || s.w_acc.size() != e.seq_len()) {
        throw AcousticError("decoder: attention length mismatch");
      }
    } catch (...) {
      errors[i] = std::current_exception();
    }
    max_len = std::max(max_len, e.seq_len());
  }
  raise_first(errors);

  std::vector<double> enc(n * max_len * dim, 0.0);
  std::vector<double> w_last(n * max_len, 0.0), w_acc(n * max_len, 0.0);
  std::vector<double> m_last(n * dim), context(n * dim), pre(n * dim);
  std::vector<double> h_att(n * dim), c_att(n * dim), h_dec(n * dim), c_dec(n * dim);
  std::vector<int> emitted(n), target(n), frames(n, 0);
  std::vector<char> stopped(n, 0);
  std::vector<double> mel(n * steps_cap * dim, 0.0);

  auto put = [dim](std::vector<double>& buf, std::size_t i, const std::vector<double>& v) {
    std::copy(v.begin(), v.end(), buf.begin() + static_cast<std::ptrdiff_t>(i * dim));
  };
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = *states[i];
    const auto& rows = encs[i]->rows.data;
    std::copy(rows.begin(), rows.end(),
              enc.begin() + static_cast<std::ptrdiff_t>(i * max_len * dim));
    std::copy(s.w_last.begin(), s.w_last.end(),
              w_last.begin() + static_cast<std::ptrdiff_t>(i * max_len));
    std::copy(s.w_acc.begin(), s.w_acc.end(),
              w_acc.begin() + static_cast<std::ptrdiff_t>(i * max_len));
    put(m_last, i, s.m_last);
    put(context, i, s.context);
    put(h_att, i, s.h_att);
    put(c_att, i, s.c_att);
    put(h_dec, i, s.h_dec);
    put(c_dec, i, s.c_dec);
    emitted[i] = s.frames_emitted;
    target[i] = s.target_frames;
  }

  // Batched recurrence. Items are independent, so the step loop sits inside
  // the item loop; finished items simply stop writing frames.
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic) if (exec == Exec::Parallel && count > 1)
  for (std::ptrdiff_t ii = 0; ii < count; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const std::size_t len = encs[i]->seq_len();
    const std::span<const double> e(enc.data() + i * max_len * dim, len * dim);
    const std::span<double> wl(w_last.data() + i * max_len, len);
    const std::span<double> wa(w_acc.data() + i * max_len, len);
    const std::span<double> ml(m_last.data() + i * dim, dim);
    const std::span<double> ctx(context.data() + i * dim, dim);
    const std::span<double> pr(pre.data() + i * dim, dim);
    const std::span<double> ha(h_att.data() + i * dim, dim);
    const std::span<double> ca(c_att.data() + i * dim, dim);
    const std::span<double> hd(h_dec.data() + i * dim, dim);
    const std::span<double> cd(c_dec.data() + i * dim, dim);
    for (std::size_t step = 0; step < steps_cap && !stopped[i]; ++step) {
      detail::prenet(ml, pr);
      detail::cell_update(pr, ctx, ha, ca);
      detail::attend(ha, e, wa, cfg.attention_penalty, wl, ctx);
      detail::cell_update(ha, ctx, hd, cd);
      detail::accumulate(wl, wa);
      detail::mel_projection(hd, ctx, ml);
      std::copy(ml.begin(), ml.end(), mel.begin() + static_cast<std::ptrdiff_t>(
                                                        (i * steps_cap + step) * dim));
      const double stop_value = emitted[i] + 1 >= target[i] ? 1.0 : 0.0;
      emitted[i] += 1;
      frames[i] += 1;
      if (stop_value > cfg.stop_threshold) stopped[i] = 1;
    }
  }

  // Scatter.
  DecodeBatchResult out;
  out.mel.resize(n);
  out.stop.resize(n);
  auto take = [dim](const std::vector<double>& buf, std::size_t i) {
    const auto first = buf.begin() + static_cast<std::ptrdiff_t>(i * dim);
    return std::vector<double>(first, first + static_cast<std::ptrdiff_t>(dim));
  };
  for (std::size_t i = 0; i < n; ++i) {
    auto& s = *states[i];
    const std::size_t len = encs[i]->seq_len();
    const auto wl = w_last.begin() + static_cast<std::ptrdiff_t>(i * max_len);
    const auto wa = w_acc.begin() + static_cast<std::ptrdiff_t>(i * max_len);
    s.w_last.assign(wl, wl + static_cast<std::ptrdiff_t>(len));
    s.w_acc.assign(wa, wa + static_cast<std::ptrdiff_t>(len));
    s.m_last = take(m_last, i);
    s.context = take(context, i);
    s.h_att = take(h_att, i);
    s.c_att = take(c_att, i);
    s.h_dec = take(h_dec, i);
    s.c_dec = take(c_dec, i);
    s.frames_emitted = emitted[i];

    const auto fcount = static_cast<std::size_t>(frames[i]);
    Matrix m(fcount, dim);
    const auto first = mel.begin() + static_cast<std::ptrdiff_t>(i * steps_cap * dim);
    std::copy(first, first + static_cast<std::ptrdiff_t>(fcount * dim), m.data.begin());
    out.mel[i].frames = std::move(m);
    out.stop[i] = stopped[i] != 0;
    out.steps = std::max(out.steps, frames[i]);
  }
  return out;
}

std::vector<VocodeResult> vocode_batch(std::span<const VocoderState* const> states,
                                       std::span<const MelChunk* const> chunks,
                                       std::span<const bool> is_last,
                                       const PipelineConfig& cfg, Exec exec) {
  const std::size_t n = states.size();
  if (chunks.size() != n || is_last.size() != n) {
    throw std::invalid_argument("vocode_batch: argument count mismatch");
  }
  const auto dim = static_cast<std::size_t>(cfg.feature_dim);
  const auto hop = static_cast<std::size_t>(cfg.hop_samples);
  const auto ov_frames = static_cast<std::size_t>(cfg.overlap_frames);
  const auto ov_len = static_cast<std::size_t>(cfg.overlap_samples());
  std::vector<std::exception_ptr> errors(n);

  std::size_t max_frames = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = *states[i];
    const auto& c = *chunks[i];
    try {
      if (c.frame_count() == 0) throw VocoderError("vocode: chunk with zero frames");
      if (c.frames.cols != dim) throw VocoderError("vocode: feature_dim mismatch");
      if (s.has_history() && (s.held_tail.size() != ov_len || s.mel_tail.rows != ov_frames)) {
        throw VocoderError("vocode: state inconsistent with overlap configuration");
      }
      const std::size_t total = (s.mel_tail.rows + c.frame_count()) * hop;
      if (!is_last[i] && total < ov_len) {
        throw VocoderError("vocode: non-final chunk shorter than the overlap region");
      }
    } catch (...) {
      errors[i] = std::current_exception();
    }
    max_frames = std::max(max_frames, s.mel_tail.rows + c.frame_count());
  }
  raise_first(errors);

  // Padded spliced-mel batch [tail(M_pre), M_cur] and its waveform batch.
  std::vector<double> spliced(n * max_frames * dim, 0.0);
  std::vector<double> wave(n * max_frames * hop, 0.0);
  std::vector<std::size_t> frames(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& tail = states[i]->mel_tail.data;
    const auto& cur = chunks[i]->frames.data;
    auto dst = spliced.begin() + static_cast<std::ptrdiff_t>(i * max_frames * dim);
    dst = std::copy(tail.begin(), tail.end(), dst);
    std::copy(cur.begin(), cur.end(), dst);
    frames[i] = states[i]->mel_tail.rows + chunks[i]->frame_count();
  }

  const CrossfadeCurve curve = crossfade_curve(ov_len);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic) if (exec == Exec::Parallel && count > 1)
  for (std::ptrdiff_t ii = 0; ii < count; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const std::span<double> seg(wave.data() + i * max_frames * hop, frames[i] * hop);
    for (std::size_t f = 0; f < frames[i]; ++f) {
      detail::expand_frame(
          std::span<const double>(spliced.data() + (i * max_frames + f) * dim, dim),
          seg.subspan(f * hop, hop));
    }
    if (states[i]->has_history()) crossfade_into(seg, states[i]->held_tail, curve);
  }

  std::vector<VocodeResult> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = *states[i];
    const std::size_t total = frames[i] * hop;
    const std::size_t split = total - (is_last[i] ? 0 : ov_len);
    const auto first = wave.begin() + static_cast<std::ptrdiff_t>(i * max_frames * hop);
    auto& r = out[i];
    r.emit.sample_offset = s.samples_emitted;
    r.emit.samples.assign(first, first + static_cast<std::ptrdiff_t>(split));
    r.new_state.held_tail.assign(first + static_cast<std::ptrdiff_t>(split),
                                 first + static_cast<std::ptrdiff_t>(total));
    const std::size_t keep = std::min(ov_frames, frames[i]);
    const auto mel_first =
        spliced.begin() + static_cast<std::ptrdiff_t>((i * max_frames + frames[i] - keep) * dim);
    r.new_state.mel_tail = Matrix(keep, dim);
    std::copy(mel_first, mel_first + static_cast<std::ptrdiff_t>(keep * dim),
              r.new_state.mel_tail.data.begin());
    r.new_state.samples_emitted =
        s.samples_emitted + static_cast<std::int64_t>(r.emit.samples.size());
  }
  return out;
}

std::vector<std::vector<double>> generate_batch(std::span<const Matrix* const> mels,
                                                const PipelineConfig& cfg, Exec exec) {
  const auto hop = static_cast<std::size_t>(cfg.hop_samples);
  std::vector<std::vector<double>> out(mels.size());
  std::vector<std::exception_ptr> errors;
  for_each_item(mels.size(), exec, errors, [&](std::size_t i) {
    const Matrix& m = *mels[i];
    out[i].resize(m.rows * hop);
    for (std::size_t f = 0; f < m.rows; ++f) {
      detail::expand_frame(m.row(f), std::span<double>(out[i]).subspan(f * hop, hop));
    }
  });
  return out;
}

}  // namespace itts
