#pragma once

#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "itts/config.hpp"
#include "itts/tensor.hpp"

namespace itts {

class VocoderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Equal-power fade curves over the overlap region, sampled on the
// half-sample grid theta_k = pi/2 * (k + 0.5) / L.
struct CrossfadeCurve {
  std::vector<double> alpha;  // fade-in, applied to the new segment
  std::vector<double> beta;   // fade-out, applied to the held tail
  std::size_t size() const { return alpha.size(); }
};

CrossfadeCurve crossfade_curve(std::size_t length);

// Carry-over between chunks of one request. Both members are empty before
// the first chunk.
struct VocoderState {
  Matrix mel_tail;                  // last overlap_frames frames seen so far
  std::vector<double> held_tail;    // last L samples, not yet emitted
  std::int64_t samples_emitted = 0;

  bool has_history() const { return !held_tail.empty(); }
  bool operator==(const VocoderState&) const = default;
};

struct VocodeResult {
  AudioChunk emit;
  VocoderState new_state;
};

// Memoryless upsampler: frame f becomes hop_samples copies of its mean.
std::vector<double> generate(const Matrix& mel, const PipelineConfig& cfg);

// Rows of `tail` followed by rows of `head`.
Matrix concat_frames(const Matrix& tail, const Matrix& head);
// Last min(count, rows) rows.
Matrix last_frames(const Matrix& m, std::size_t count);

// One streaming step. Splices the stored mel tail in front of the chunk,
// cross-fades the head with the held samples, emits everything except the
// new tail (or everything, when is_last).
VocodeResult vocode_chunk(const VocoderState& state, const MelChunk& chunk, bool is_last,
                          const PipelineConfig& cfg);

// Applies head = alpha * head + beta * tail in place over curve.size() samples.
void crossfade_into(std::span<double> head, std::span<const double> tail,
                    const CrossfadeCurve& curve);

}  // namespace itts
