#include "itts/vocoder.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "recurrence.hpp"

namespace itts {

CrossfadeCurve crossfade_curve(std::size_t length) {
  if (length == 0) throw VocoderError("crossfade length must be >= 1");
  CrossfadeCurve c;
  c.alpha.resize(length);
  c.beta.resize(length);
  for (std::size_t k = 0; k < length; ++k) {
    const double theta = std::numbers::pi / 2.0 * (static_cast<double>(k) + 0.5) /
                         static_cast<double>(length);
    c.alpha[k] = std::sin(theta);
    c.beta[k] = std::cos(theta);
  }
  return c;
}

std::vector<double> generate(const Matrix& mel, const PipelineConfig& cfg) {
  const auto hop = static_cast<std::size_t>(cfg.hop_samples);
  std::vector<double> out(mel.rows * hop);
  for (std::size_t f = 0; f < mel.rows; ++f) {
    detail::expand_frame(mel.row(f), std::span<double>(out).subspan(f * hop, hop));
  }
  return out;
}

Matrix concat_frames(const Matrix& tail, const Matrix& head) {
  if (tail.rows == 0) return head;
  if (tail.cols != head.cols) throw VocoderError("concat_frames: feature_dim mismatch");
  Matrix out(tail.rows + head.rows, head.cols);
  std::copy(tail.data.begin(), tail.data.end(), out.data.begin());
  std::copy(head.data.begin(), head.data.end(),
            out.data.begin() + static_cast<std::ptrdiff_t>(tail.data.size()));
  return out;
}

Matrix last_frames(const Matrix& m, std::size_t count) {
  const std::size_t keep = std::min(count, m.rows);
  Matrix out(keep, m.cols);
  std::copy(m.data.end() - static_cast<std::ptrdiff_t>(keep * m.cols), m.data.end(),
            out.data.begin());
  return out;
}

void crossfade_into(std::span<double> head, std::span<const double> tail,
                    const CrossfadeCurve& curve) {
  for (std::size_t k = 0; k < curve.size(); ++k) {
    head[k] = curve.alpha[k] * head[k] + curve.beta[k] * tail[k];
  }
}

VocodeResult vocode_chunk(const VocoderState& state, const MelChunk& chunk, bool is_last,
                          const PipelineConfig& cfg) {
  if (chunk.frame_count() == 0) throw VocoderError("vocode: chunk with zero frames");
  if (chunk.frames.cols != static_cast<std::size_t>(cfg.feature_dim)) {
    throw VocoderError("vocode: feature_dim mismatch");
  }
  const auto overlap_len = static_cast<std::size_t>(cfg.overlap_samples());
  const Matrix spliced = concat_frames(state.mel_tail, chunk.frames);
  std::vector<double> segment = generate(spliced, cfg);

  if (state.has_history()) {
    if (state.held_tail.size() != overlap_len ||
        state.mel_tail.rows != static_cast<std::size_t>(cfg.overlap_frames)) {
      throw VocoderError("vocode: state inconsistent with overlap configuration");
    }
    crossfade_into(segment, state.held_tail, crossfade_curve(overlap_len));
  }

  VocodeResult out;
  const std::size_t withhold = is_last ? 0 : overlap_len;
  if (segment.size() < withhold) {
    throw VocoderError("vocode: non-final chunk shorter than the overlap region");
  }
  const auto split = static_cast<std::ptrdiff_t>(segment.size() - withhold);
  out.emit.sample_offset = state.samples_emitted;
  out.emit.samples.assign(segment.begin(), segment.begin() + split);
  out.new_state.held_tail.assign(segment.begin() + split, segment.end());
  out.new_state.mel_tail = last_frames(spliced, static_cast<std::size_t>(cfg.overlap_frames));
  out.new_state.samples_emitted =
      state.samples_emitted + static_cast<std::int64_t>(out.emit.samples.size());
  return out;
}

}  // namespace itts
