#include "itts/acoustic.hpp"

#include <string>

#include "recurrence.hpp"

namespace itts {

Matrix embed(const FrontendOutput& fo, const PipelineConfig& cfg) {
  const std::size_t n = fo.phonemes.size();
  if (n == 0) throw AcousticError("encode: empty phoneme sequence");
  if (fo.pw.size() != n || fo.pph.size() != n || fo.iph.size() != n) {
    throw AcousticError("encode: prosody tokens not regulated to phoneme length");
  }
  const auto dim = static_cast<std::size_t>(cfg.feature_dim);
  Matrix e(n, dim);
  for (std::size_t t = 0; t < n; ++t) {
    const auto tok = seeded_vector(kTokenTable, fo.phonemes[t], cfg.feature_dim);
    const auto pw = seeded_vector(kPwTable, fo.pw[t], cfg.feature_dim);
    const auto pph = seeded_vector(kPphTable, fo.pph[t], cfg.feature_dim);
    const auto iph = seeded_vector(kIphTable, fo.iph[t], cfg.feature_dim);
    for (std::size_t d = 0; d < dim; ++d) e.at(t, d) = tok[d] + pw[d] + pph[d] + iph[d];
  }
  return e;
}

EncodedFeatures encode_embeddings(const Matrix& e_all) {
  EncodedFeatures enc{Matrix(e_all.rows, e_all.cols)};
  for (std::size_t t = 0; t < e_all.rows; ++t) {
    detail::encode_row(e_all.data, e_all.rows, e_all.cols, t, enc.rows.row(t));
  }
  return enc;
}

EncodedFeatures encode(const FrontendOutput& fo, const PipelineConfig& cfg) {
  return encode_embeddings(embed(fo, cfg));
}

DecoderState init_decoder_state(const EncodedFeatures& enc, const PipelineConfig& cfg) {
  const auto dim = static_cast<std::size_t>(cfg.feature_dim);
  const std::size_t n = enc.seq_len();
  DecoderState s;
  s.m_last.assign(dim, 0.0);
  s.context.assign(dim, 0.0);
  s.w_last.assign(n, 0.0);
  s.w_acc.assign(n, 0.0);
  s.h_att.assign(dim, 0.0);
  s.c_att.assign(dim, 0.0);
  s.h_dec.assign(dim, 0.0);
  s.c_dec.assign(dim, 0.0);
  s.target_frames = cfg.frames_per_phoneme * static_cast<int>(n);
  return s;
}

namespace {

void check_consistent(const DecoderState& s, const EncodedFeatures& enc,
                      const PipelineConfig& cfg) {
  const auto dim = static_cast<std::size_t>(cfg.feature_dim);
  if (enc.rows.cols != dim || s.m_last.size() != dim || s.context.size() != dim ||
      s.h_att.size() != dim || s.c_att.size() != dim || s.h_dec.size() != dim ||
      s.c_dec.size() != dim) {
    throw AcousticError("decoder: feature_dim mismatch between state and encoder");
  }
  if (s.w_last.size() != enc.seq_len() || s.w_acc.size() != enc.seq_len()) {
    throw AcousticError("decoder: attention length " + std::to_string(s.w_acc.size()) +
                        " != encoder length " + std::to_string(enc.seq_len()));
  }
}

}  // namespace

DecoderStepResult decoder_step(DecoderState& s, const EncodedFeatures& enc,
                               const PipelineConfig& cfg) {
  check_consistent(s, enc, cfg);
  std::vector<double> pre(s.m_last.size());
  detail::prenet(s.m_last, pre);
  detail::cell_update(pre, s.context, s.h_att, s.c_att);
  detail::attend(s.h_att, enc.rows.data, s.w_acc, cfg.attention_penalty, s.w_last,
                 s.context);
  detail::cell_update(s.h_att, s.context, s.h_dec, s.c_dec);
  detail::accumulate(s.w_last, s.w_acc);
  detail::mel_projection(s.h_dec, s.context, s.m_last);

  DecoderStepResult out;
  out.mel_frame = s.m_last;
  out.stop_value = s.frames_emitted + 1 >= s.target_frames ? 1.0 : 0.0;
  s.frames_emitted += 1;
  return out;
}

DecodeChunkResult decode_chunk(const DecoderState& state, const EncodedFeatures& enc,
                               const PipelineConfig& cfg) {
  if (state.stopped()) throw AcousticError("decode past stop");
  DecodeChunkResult out;
  out.new_state = state;
  std::vector<double> frames;
  std::size_t count = 0;
  for (int i = 0; i < cfg.chunk_frames; ++i) {
    auto step = decoder_step(out.new_state, enc, cfg);
    frames.insert(frames.end(), step.mel_frame.begin(), step.mel_frame.end());
    ++count;
    if (step.stop_value > cfg.stop_threshold) {
      out.stop = true;
      break;
    }
  }
  out.mel.frames.rows = count;
  out.mel.frames.cols = static_cast<std::size_t>(cfg.feature_dim);
  out.mel.frames.data = std::move(frames);
  return out;
}

}  // namespace itts
