#include "itts/wire.hpp"

#include <json.hpp>
#include <openssl/evp.h>

namespace itts::wire {

std::string base64_encode(std::span<const unsigned char> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<unsigned char> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw ProtocolError("base64: length not a multiple of 4");
  std::vector<unsigned char> out(3 * text.size() / 4);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw ProtocolError("base64: invalid input");
  // EVP_DecodeBlock keeps the zero bytes produced by '=' padding.
  std::size_t len = static_cast<std::size_t>(n);
  if (!text.empty() && text.back() == '=') --len;
  if (text.size() >= 2 && text[text.size() - 2] == '=') --len;
  out.resize(len);
  return out;
}

std::string pcm_to_base64(std::span<const std::int16_t> pcm) {
  std::vector<unsigned char> bytes(pcm.size() * 2);
  for (std::size_t i = 0; i < pcm.size(); ++i) {
    const auto v = static_cast<std::uint16_t>(pcm[i]);
    bytes[2 * i] = static_cast<unsigned char>(v & 0xFF);
    bytes[2 * i + 1] = static_cast<unsigned char>(v >> 8);
  }
  return base64_encode(bytes);
}

std::vector<std::int16_t> pcm_from_base64(std::string_view text) {
  const auto bytes = base64_decode(text);
  if (bytes.size() % 2 != 0) throw ProtocolError("pcm payload has odd byte count");
  std::vector<std::int16_t> pcm(bytes.size() / 2);
  for (std::size_t i = 0; i < pcm.size(); ++i) {
    pcm[i] = static_cast<std::int16_t>(static_cast<std::uint16_t>(bytes[2 * i]) |
                                       static_cast<std::uint16_t>(bytes[2 * i + 1]) << 8);
  }
  return pcm;
}

std::string encode_payload(const Message& m) {
  nlohmann::json j;
  std::visit(
      [&](const auto& msg) {
        using T = std::decay_t<decltype(msg)>;
        if constexpr (std::is_same_v<T, SubmitRequest>) {
          j = {{"type", "submit"}, {"tag", msg.request_tag}, {"text", msg.text}};
        } else if constexpr (std::is_same_v<T, ChunkResponse>) {
          j = {{"type", "chunk"},
               {"tag", msg.request_tag},
               {"chunk_index", msg.chunk_index},
               {"sample_offset", msg.sample_offset},
               {"pcm", pcm_to_base64(msg.pcm)}};
        } else if constexpr (std::is_same_v<T, Done>) {
          j = {{"type", "done"}, {"tag", msg.request_tag}, {"total_samples", msg.total_samples}};
        } else {
          j = {{"type", "error"}, {"tag", msg.request_tag}, {"message", msg.message}};
        }
      },
      m);
  // Error text may quote arbitrary input; everything else must be valid UTF-8.
  const auto handler = std::holds_alternative<Error>(m) ? nlohmann::json::error_handler_t::replace
                                                        : nlohmann::json::error_handler_t::strict;
  try {
    return j.dump(-1, ' ', false, handler);
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("cannot encode payload: ") + e.what());
  }
}

Message decode_payload(std::string_view payload) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(payload);
    const auto type = j.at("type").get<std::string>();
    const auto tag = j.at("tag").get<std::string>();
    if (type == "submit") return SubmitRequest{j.at("text").get<std::string>(), tag};
    if (type == "chunk") {
      return ChunkResponse{tag, j.at("chunk_index").get<std::int64_t>(),
                           j.at("sample_offset").get<std::int64_t>(),
                           pcm_from_base64(j.at("pcm").get<std::string>())};
    }
    if (type == "done") return Done{tag, j.at("total_samples").get<std::int64_t>()};
    if (type == "error") return Error{tag, j.at("message").get<std::string>()};
    throw ProtocolError("unknown message type '" + type + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed payload: ") + e.what());
  }
}

std::string frame(const Message& m) {
  const std::string payload = encode_payload(m);
  if (payload.size() > kMaxFrameBytes) throw ProtocolError("frame exceeds 1 MiB");
  const auto n = static_cast<std::uint32_t>(payload.size());
  std::string out;
  out.reserve(4 + payload.size());
  out.push_back(static_cast<char>(n >> 24));
  out.push_back(static_cast<char>(n >> 16));
  out.push_back(static_cast<char>(n >> 8));
  out.push_back(static_cast<char>(n));
  out += payload;
  return out;
}

std::uint32_t read_length_prefix(std::span<const unsigned char, 4> b) {
  return static_cast<std::uint32_t>(b[0]) << 24 | static_cast<std::uint32_t>(b[1]) << 16 |
         static_cast<std::uint32_t>(b[2]) << 8 | static_cast<std::uint32_t>(b[3]);
}

}  // namespace itts::wire
