#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>

#include "itts/channel.hpp"
#include "itts/tensor.hpp"

namespace itts {

using RequestId = std::uint64_t;

struct StreamEnd {
  std::int64_t total_samples = 0;
};

struct StreamError {
  std::string message;
  bool cancelled = false;
};

// One message on a request's outbound stream: audio, then exactly one of
// StreamEnd / StreamError.
using StreamEvent = std::variant<AudioChunk, StreamEnd, StreamError>;
using ChunkSink = Channel<StreamEvent>;

class PoolClosed : public std::runtime_error {
 public:
  PoolClosed() : std::runtime_error("pool shut down") {}
};

// Consumer side of one request.
struct StreamHandle {
  RequestId id = 0;
  std::shared_ptr<ChunkSink> sink;

  // Blocks for the next event; nullopt once the stream is closed and drained.
  std::optional<StreamEvent> next() const { return sink->pop(); }
};

// Anything that accepts text and streams audio back: the incremental
// scheduler, the round-based baseline, or a remote server connection.
class Pipeline {
 public:
  virtual ~Pipeline() = default;
  virtual StreamHandle submit(std::string text) = 0;
  virtual const char* tag() const = 0;
};

}  // namespace itts
