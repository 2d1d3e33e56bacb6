#pragma once

// Packed batch kernels for the four modules. Each gathers per-item state
// into contiguous, padded buffers, runs the batch (OpenMP across items when
// Exec::Parallel), and scatters results back per item. The per-item
// functions in frontend/acoustic/vocoder are the serial reference these
// kernels must match bit for bit.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "itts/acoustic.hpp"
#include "itts/frontend.hpp"
#include "itts/vocoder.hpp"

namespace itts {

enum class Exec { Serial, Parallel };

// Raised when one item of a batch cannot be processed. The remaining items
// are untouched; callers may drop the item and rerun the batch.
class BatchItemError : public std::runtime_error {
 public:
  BatchItemError(std::size_t index, const std::string& what)
      : std::runtime_error(what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

std::vector<FrontendOutput> frontend_batch(std::span<const std::string_view> texts,
                                           const Lexicon& lex, Exec exec);

std::vector<EncodedFeatures> encode_batch(std::span<const FrontendOutput* const> items,
                                          const PipelineConfig& cfg, Exec exec);

struct DecodeBatchResult {
  std::vector<MelChunk> mel;
  std::vector<bool> stop;
  // Steps executed by the longest item; the batch occupies this many slots.
  int steps = 0;
};

// Advances each state by up to max_steps frames (stopping each item at its
// own stop frame) and writes the new states back through `states`.
DecodeBatchResult decode_batch(std::span<DecoderState* const> states,
                               std::span<const EncodedFeatures* const> encs,
                               int max_steps, const PipelineConfig& cfg, Exec exec);

std::vector<VocodeResult> vocode_batch(std::span<const VocoderState* const> states,
                                       std::span<const MelChunk* const> chunks,
                                       std::span<const bool> is_last,
                                       const PipelineConfig& cfg, Exec exec);

// Whole-utterance vocoding without any overlap handling.
std::vector<std::vector<double>> generate_batch(std::span<const Matrix* const> mels,
                                                const PipelineConfig& cfg, Exec exec);

}  // namespace itts
