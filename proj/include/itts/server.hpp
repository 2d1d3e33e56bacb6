#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "itts/stream.hpp"
#include "itts/wire.hpp"

namespace itts {

class ClientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Owning socket descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket() { reset(); }
  Socket(Socket&& o) noexcept : fd_(o.release()) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = o.release();
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  int fd() const { return fd_; }
  explicit operator bool() const { return fd_ >= 0; }
  int release() {
    const int f = fd_;
    fd_ = -1;
    return f;
  }
  void reset();
  // Unblocks readers on other threads without releasing the descriptor.
  void shutdown_both() const;

  void send_all(std::string_view bytes) const;
  // False on clean EOF before any byte; throws on EOF mid-buffer.
  bool recv_exact(std::span<unsigned char> out) const;

 private:
  int fd_ = -1;
};

Socket connect_tcp(const std::string& host, std::uint16_t port);

// Reads one frame; nullopt on clean EOF at a frame boundary.
std::optional<wire::Message> read_message(const Socket& s);

// Streaming TTS service over length-prefixed frames. Each SubmitRequest is
// forwarded to the pipeline; its chunks go back as ChunkResponses in order,
// followed by Done or Error. Tags on one connection are independent.
class Server {
 public:
  Server(Pipeline& pipeline, int sample_rate);
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Port 0 picks an ephemeral port; see port().
  void listen(const std::string& host, std::uint16_t port);
  std::uint16_t port() const { return port_; }
  void stop();

 private:
  struct Connection;
  void accept_loop();
  void serve_connection(const std::shared_ptr<Connection>& conn);

  Pipeline& pipeline_;
  int sample_rate_;
  Socket listener_;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::jthread acceptor_;

  std::mutex conns_mu_;
  std::list<std::shared_ptr<Connection>> conns_;
};

struct ClientChunk {
  std::int64_t chunk_index = 0;
  std::int64_t sample_offset = 0;
  std::vector<std::int16_t> pcm;
  std::chrono::steady_clock::time_point received;
};

struct ClientResult {
  std::vector<ClientChunk> chunks;
  std::int64_t total_samples = 0;
  std::chrono::steady_clock::time_point sent;
  std::chrono::steady_clock::time_point done;

  std::vector<double> samples() const;
};

// One request on a fresh connection. Throws ClientError on refusal,
// protocol violations, a server-side Error, or a truncated stream.
ClientResult client_request(const std::string& host, std::uint16_t port,
                            const std::string& text);

// Pipeline facade over a small set of multiplexed connections, so the load
// harness can measure through the network boundary.
class RemotePipeline : public Pipeline {
 public:
  RemotePipeline(const std::string& host, std::uint16_t port, std::size_t connections = 4);
  ~RemotePipeline() override;

  StreamHandle submit(std::string text) override;
  const char* tag() const override { return "incr-net"; }

 private:
  struct Link;
  void read_loop(Link& link);

  std::vector<std::unique_ptr<Link>> links_;
  std::atomic<std::uint64_t> next_{1};
};

}  // namespace itts
