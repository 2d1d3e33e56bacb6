#include "itts/reference.hpp"

namespace itts {

std::vector<double> ReferenceSynthesis::samples() const {
  std::vector<double> out;
  for (const auto& c : audio_chunks) out.insert(out.end(), c.samples.begin(), c.samples.end());
  return out;
}

std::size_t ReferenceSynthesis::total_frames() const {
  std::size_t n = 0;
  for (const auto& m : mel_chunks) n += m.frame_count();
  return n;
}

ReferenceSynthesis synthesize_reference(std::string_view text, const Lexicon& lex,
                                        const PipelineConfig& cfg) {
  ReferenceSynthesis out;
  out.frontend = run_frontend(text, lex);
  out.enc = encode(out.frontend, cfg);
  DecoderState dec = init_decoder_state(out.enc, cfg);
  VocoderState voc;
  bool stop = false;
  while (!stop) {
    auto chunk = decode_chunk(dec, out.enc, cfg);
    dec = std::move(chunk.new_state);
    stop = chunk.stop;
    auto v = vocode_chunk(voc, chunk.mel, stop, cfg);
    voc = std::move(v.new_state);
    out.mel_chunks.push_back(std::move(chunk.mel));
    out.audio_chunks.push_back(std::move(v.emit));
  }
  return out;
}

std::vector<double> synthesize_whole(std::string_view text, const Lexicon& lex,
                                     const PipelineConfig& cfg) {
  const auto fo = run_frontend(text, lex);
  const auto enc = encode(fo, cfg);
  DecoderState dec = init_decoder_state(enc, cfg);
  Matrix mel(0, static_cast<std::size_t>(cfg.feature_dim));
  while (!dec.stopped()) {
    auto step = decoder_step(dec, enc, cfg);
    mel.data.insert(mel.data.end(), step.mel_frame.begin(), step.mel_frame.end());
    mel.rows += 1;
  }
  return generate(mel, cfg);
}

}  // namespace itts
