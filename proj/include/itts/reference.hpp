#pragma once

#include <string_view>
#include <vector>

#include "itts/acoustic.hpp"
#include "itts/frontend.hpp"
#include "itts/vocoder.hpp"

namespace itts {

// Single-request synthesis through the per-item functions, with no pool and
// no batching. Yields the chunk stream the scheduler must reproduce.
struct ReferenceSynthesis {
  FrontendOutput frontend;
  EncodedFeatures enc;
  std::vector<MelChunk> mel_chunks;
  std::vector<AudioChunk> audio_chunks;

  std::vector<double> samples() const;
  std::size_t total_frames() const;
};

ReferenceSynthesis synthesize_reference(std::string_view text, const Lexicon& lex,
                                        const PipelineConfig& cfg);

// Whole-utterance audio without chunking or cross-fade, as the baseline
// produces it.
std::vector<double> synthesize_whole(std::string_view text, const Lexicon& lex,
                                     const PipelineConfig& cfg);

}  // namespace itts
