#pragma once

#include <stdexcept>
#include <vector>

#include "itts/config.hpp"
#include "itts/frontend.hpp"
#include "itts/tensor.hpp"

namespace itts {

class AcousticError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Embedding tables used by the encoder stand-in.
enum EmbeddingTable : std::uint32_t {
  kTokenTable = 0,
  kPwTable = 1,
  kPphTable = 2,
  kIphTable = 3,
};

// seq_len x feature_dim; every row depends on the whole sequence.
struct EncodedFeatures {
  Matrix rows;
  std::size_t seq_len() const { return rows.rows; }
  bool operator==(const EncodedFeatures&) const = default;
};

// Cross-chunk decoder state. Vectors of length feature_dim except the two
// attention-weight vectors, which have one entry per encoder row.
struct DecoderState {
  std::vector<double> m_last;
  std::vector<double> context;       // attention context A
  std::vector<double> w_last;        // attention weights of the last frame
  std::vector<double> w_acc;         // sum of all past w_last
  std::vector<double> h_att, c_att;  // attention cell
  std::vector<double> h_dec, c_dec;  // decoder cell
  int frames_emitted = 0;
  int target_frames = 0;

  bool stopped() const { return frames_emitted >= target_frames; }
  bool operator==(const DecoderState&) const = default;
};

struct DecoderStepResult {
  std::vector<double> mel_frame;
  double stop_value = 0.0;
};

struct DecodeChunkResult {
  MelChunk mel;
  bool stop = false;
  DecoderState new_state;
};

// Sum of the four embedding rows for every phoneme.
Matrix embed(const FrontendOutput& fo, const PipelineConfig& cfg);

// F[t] = (E[t] + mean(E[0..t]) + mean(E[t..n-1])) / 3. Sums run in
// ascending row order.
EncodedFeatures encode(const FrontendOutput& fo, const PipelineConfig& cfg);
EncodedFeatures encode_embeddings(const Matrix& e_all);

DecoderState init_decoder_state(const EncodedFeatures& enc, const PipelineConfig& cfg);

// One autoregressive step; updates `state` in place.
DecoderStepResult decoder_step(DecoderState& state, const EncodedFeatures& enc,
                               const PipelineConfig& cfg);

// Up to chunk_frames steps, truncated at the stop frame.
DecodeChunkResult decode_chunk(const DecoderState& state, const EncodedFeatures& enc,
                               const PipelineConfig& cfg);

}  // namespace itts
