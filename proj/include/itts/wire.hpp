#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace itts::wire {

inline constexpr std::size_t kMaxFrameBytes = 1u << 20;

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SubmitRequest {
  std::string text;
  std::string request_tag;
};

struct ChunkResponse {
  std::string request_tag;
  std::int64_t chunk_index = 0;
  std::int64_t sample_offset = 0;
  std::vector<std::int16_t> pcm;
};

struct Done {
  std::string request_tag;
  std::int64_t total_samples = 0;
};

struct Error {
  std::string request_tag;
  std::string message;
};

using Message = std::variant<SubmitRequest, ChunkResponse, Done, Error>;

// JSON payload without the length prefix.
std::string encode_payload(const Message& m);
Message decode_payload(std::string_view payload);

// 4-byte big-endian length followed by the payload.
std::string frame(const Message& m);
std::uint32_t read_length_prefix(std::span<const unsigned char, 4> bytes);

std::string base64_encode(std::span<const unsigned char> bytes);
std::vector<unsigned char> base64_decode(std::string_view text);

std::string pcm_to_base64(std::span<const std::int16_t> pcm);
std::vector<std::int16_t> pcm_from_base64(std::string_view text);

}  // namespace itts::wire
