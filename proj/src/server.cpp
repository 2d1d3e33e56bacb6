#include "itts/server.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <set>
#include <system_error>

#include "itts/channel.hpp"
#include "itts/wav.hpp"

namespace itts {

namespace {

[[noreturn]] void throw_errno(const std::string& what) {
  throw std::system_error(errno, std::generic_category(), what);
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

}  // namespace

void Socket::reset() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

void Socket::shutdown_both() const {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void Socket::send_all(std::string_view bytes) const {
  while (!bytes.empty()) {
    const ssize_t n = ::send(fd_, bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_errno("send");
    }
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
}

bool Socket::recv_exact(std::span<unsigned char> out) const {
  std::size_t got = 0;
  while (got < out.size()) {
    const ssize_t n = ::recv(fd_, out.data() + got, out.size() - got, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_errno("recv");
    }
    if (n == 0) {
      if (got == 0) return false;
      throw wire::ProtocolError("connection closed mid-frame");
    }
    got += static_cast<std::size_t>(n);
  }
  return true;
}

Socket connect_tcp(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
    throw ClientError("resolve " + host + ": " + ::gai_strerror(rc));
  }
  std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(res, ::freeaddrinfo);
  Socket s(::socket(res->ai_family, res->ai_socktype, res->ai_protocol));
  if (!s) throw_errno("socket");
  if (::connect(s.fd(), res->ai_addr, res->ai_addrlen) != 0) {
    throw ClientError("connect " + host + ":" + service + ": " + std::strerror(errno));
  }
  set_nodelay(s.fd());
  return s;
}

std::optional<wire::Message> read_message(const Socket& s) {
  std::array<unsigned char, 4> prefix{};
  if (!s.recv_exact(prefix)) return std::nullopt;
  const std::uint32_t len = wire::read_length_prefix(prefix);
  if (len == 0) throw wire::ProtocolError("zero-length frame");
  if (len > wire::kMaxFrameBytes) throw wire::ProtocolError("frame exceeds 1 MiB");
  std::string payload(len, '\0');
  if (!s.recv_exact({reinterpret_cast<unsigned char*>(payload.data()), payload.size()})) {
    throw wire::ProtocolError("connection closed mid-frame");
  }
  return wire::decode_payload(payload);
}

// ---------------------------------------------------------------------------

struct Server::Connection {
  Socket sock;
  Channel<std::string> outbound;
  std::atomic<bool> closing{false};
  std::atomic<bool> finished{false};
  std::mutex tags_mu;
  std::set<std::string> active_tags;
  std::vector<std::jthread> forwarders;
  std::jthread worker;  // declared last: joined before the rest is torn down
};

Server::Server(Pipeline& pipeline, int sample_rate)
    : pipeline_(pipeline), sample_rate_(sample_rate) {}

Server::~Server() { stop(); }

void Server::listen(const std::string& host, std::uint16_t port) {
  Socket s(::socket(AF_INET, SOCK_STREAM, 0));
  if (!s) throw_errno("socket");
  int one = 1;
  ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    throw std::invalid_argument("bind address must be an IPv4 literal: " + host);
  }
  if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) throw_errno("bind");
  if (::listen(s.fd(), 128) != 0) throw_errno("listen");
  socklen_t len = sizeof addr;
  ::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  listener_ = std::move(s);
  stopping_ = false;
  acceptor_ = std::jthread([this] { accept_loop(); });
}

void Server::stop() {
  if (stopping_.exchange(true)) return;
  listener_.shutdown_both();
  if (acceptor_.joinable()) acceptor_.join();
  std::list<std::shared_ptr<Connection>> conns;
  {
    std::lock_guard lock(conns_mu_);
    conns.swap(conns_);
  }
  for (auto& c : conns) {
    c->closing = true;
    c->sock.shutdown_both();
  }
  conns.clear();  // joins each worker
  listener_.reset();
}

void Server::accept_loop() {
  while (!stopping_) {
    const int fd = ::accept(listener_.fd(), nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      break;  // listener shut down
    }
    set_nodelay(fd);
    auto conn = std::make_shared<Connection>();
    conn->sock = Socket(fd);
    std::lock_guard lock(conns_mu_);
    conns_.remove_if([](const auto& c) { return c->finished.load(); });
    if (stopping_) break;
    conn->worker = std::jthread([this, raw = conn.get()] {
      // The list owns the connection; this thread only borrows it.
      std::shared_ptr<Connection> alias(std::shared_ptr<Connection>{}, raw);
      serve_connection(alias);
    });
    conns_.push_back(std::move(conn));
  }
}

void Server::serve_connection(const std::shared_ptr<Connection>& conn) {
  std::jthread writer([conn] {
    while (auto bytes = conn->outbound.pop()) {
      try {
        conn->sock.send_all(*bytes);
      } catch (const std::exception&) {
        conn->closing = true;
        break;
      }
    }
  });
  auto send = [&](const wire::Message& m) { conn->outbound.push(wire::frame(m)); };

  while (!conn->closing) {
    std::optional<wire::Message> msg;
    try {
      msg = read_message(conn->sock);
    } catch (const wire::ProtocolError& e) {
      send(wire::Error{"", e.what()});
      break;
    } catch (const std::exception&) {
      break;  // socket error or shutdown
    }
    if (!msg) break;
    auto* submit = std::get_if<wire::SubmitRequest>(&*msg);
    if (!submit) {
      send(wire::Error{"", "clients may only send submit messages"});
      break;
    }
    const std::string tag = submit->request_tag;
    {
      std::lock_guard lock(conn->tags_mu);
      if (!conn->active_tags.insert(tag).second) {
        send(wire::Error{tag, "tag already in flight"});
        continue;
      }
    }
    StreamHandle handle;
    try {
      handle = pipeline_.submit(std::move(submit->text));
    } catch (const std::exception& e) {
      send(wire::Error{tag, e.what()});
      std::lock_guard lock(conn->tags_mu);
      conn->active_tags.erase(tag);
      continue;
    }
    conn->forwarders.emplace_back([conn, tag, handle] {
      std::int64_t index = 0;
      auto push = [&](const wire::Message& m) { conn->outbound.push(wire::frame(m)); };
      bool ended = false;
      while (!ended && !conn->closing) {
        auto ev = handle.sink->pop_for(std::chrono::milliseconds(50));
        if (!ev) {
          if (handle.sink->closed() && !(ev = handle.sink->try_pop())) {
            push(wire::Error{tag, "stream closed without end marker"});
            break;
          }
          if (!ev) continue;
        }
        if (auto* chunk = std::get_if<AudioChunk>(&*ev)) {
          push(wire::ChunkResponse{tag, index++, chunk->sample_offset,
                                   to_pcm16(chunk->samples)});
        } else if (auto* end = std::get_if<StreamEnd>(&*ev)) {
          push(wire::Done{tag, end->total_samples});
          ended = true;
        } else {
          push(wire::Error{tag, std::get<StreamError>(*ev).message});
          ended = true;
        }
      }
      std::lock_guard lock(conn->tags_mu);
      conn->active_tags.erase(tag);
    });
  }

  conn->closing = true;
  for (auto& f : conn->forwarders) f.join();
  conn->forwarders.clear();
  conn->outbound.close();
  writer.join();
  conn->sock.shutdown_both();
  conn->finished = true;
  (void)sample_rate_;
}

// ---------------------------------------------------------------------------

std::vector<double> ClientResult::samples() const {
  std::vector<double> out;
  for (const auto& c : chunks) {
    for (auto v : c.pcm) out.push_back(from_pcm16(v));
  }
  return out;
}

ClientResult client_request(const std::string& host, std::uint16_t port,
                            const std::string& text) {
  Socket s = connect_tcp(host, port);
  ClientResult out;
  const std::string tag = "0";
  std::string request;
  try {
    request = wire::frame(wire::SubmitRequest{text, tag});
  } catch (const wire::ProtocolError& e) {
    throw ClientError(e.what());
  }
  out.sent = std::chrono::steady_clock::now();
  s.send_all(request);
  std::int64_t offset = 0;
  while (true) {
    std::optional<wire::Message> msg;
    try {
      msg = read_message(s);
    } catch (const wire::ProtocolError& e) {
      throw ClientError(std::string("protocol violation: ") + e.what());
    } catch (const std::system_error& e) {
      throw ClientError(std::string("truncated stream: ") + e.what());
    }
    if (!msg) throw ClientError("truncated stream: connection closed before done");
    const auto now = std::chrono::steady_clock::now();
    if (auto* c = std::get_if<wire::ChunkResponse>(&*msg)) {
      if (c->request_tag != tag) throw ClientError("protocol violation: foreign tag");
      if (c->chunk_index != static_cast<std::int64_t>(out.chunks.size()) ||
          c->sample_offset != offset) {
        throw ClientError("protocol violation: chunk out of order");
      }
      offset += static_cast<std::int64_t>(c->pcm.size());
      out.chunks.push_back({c->chunk_index, c->sample_offset, std::move(c->pcm), now});
    } else if (auto* d = std::get_if<wire::Done>(&*msg)) {
      if (d->total_samples != offset) throw ClientError("protocol violation: sample count");
      out.total_samples = d->total_samples;
      out.done = now;
      return out;
    } else if (auto* e = std::get_if<wire::Error>(&*msg)) {
      throw ClientError("server error: " + e->message);
    } else {
      throw ClientError("protocol violation: unexpected message");
    }
  }
}

// ---------------------------------------------------------------------------

struct RemotePipeline::Link {
  Socket sock;
  std::mutex write_mu;
  std::mutex map_mu;
  std::map<std::string, std::shared_ptr<ChunkSink>> sinks;
  bool dead = false;
  std::jthread reader;
};

RemotePipeline::RemotePipeline(const std::string& host, std::uint16_t port,
                               std::size_t connections) {
  for (std::size_t i = 0; i < std::max<std::size_t>(1, connections); ++i) {
    auto link = std::make_unique<Link>();
    link->sock = connect_tcp(host, port);
    link->reader = std::jthread([this, l = link.get()] { read_loop(*l); });
    links_.push_back(std::move(link));
  }
}

RemotePipeline::~RemotePipeline() {
  for (auto& l : links_) l->sock.shutdown_both();
  links_.clear();
}

StreamHandle RemotePipeline::submit(std::string text) {
  const std::uint64_t id = next_.fetch_add(1);
  Link& link = *links_[id % links_.size()];
  auto sink = std::make_shared<ChunkSink>();
  const std::string tag = std::to_string(id);
  {
    std::lock_guard lock(link.map_mu);
    if (link.dead) throw ClientError("connection lost");
    link.sinks.emplace(tag, sink);
  }
  std::lock_guard lock(link.write_mu);
  link.sock.send_all(wire::frame(wire::SubmitRequest{std::move(text), tag}));
  return {id, sink};
}

void RemotePipeline::read_loop(Link& link) {
  auto finish = [&](const std::string& tag, StreamEvent ev) {
    std::shared_ptr<ChunkSink> sink;
    {
      std::lock_guard lock(link.map_mu);
      auto it = link.sinks.find(tag);
      if (it == link.sinks.end()) return;
      sink = it->second;
      link.sinks.erase(it);
    }
    sink->push(std::move(ev));
    sink->close();
  };
  try {
    while (auto msg = read_message(link.sock)) {
      if (auto* c = std::get_if<wire::ChunkResponse>(&*msg)) {
        std::shared_ptr<ChunkSink> sink;
        {
          std::lock_guard lock(link.map_mu);
          auto it = link.sinks.find(c->request_tag);
          if (it != link.sinks.end()) sink = it->second;
        }
        if (!sink) continue;
        AudioChunk chunk;
        chunk.sample_offset = c->sample_offset;
        chunk.samples.reserve(c->pcm.size());
        for (auto v : c->pcm) chunk.samples.push_back(from_pcm16(v));
        sink->push(std::move(chunk));
      } else if (auto* d = std::get_if<wire::Done>(&*msg)) {
        finish(d->request_tag, StreamEnd{d->total_samples});
      } else if (auto* e = std::get_if<wire::Error>(&*msg)) {
        finish(e->request_tag, StreamError{e->message, false});
      }
    }
  } catch (const std::exception&) {
  }
  std::lock_guard lock(link.map_mu);
  link.dead = true;
  for (auto& [tag, sink] : link.sinks) {
    sink->push(StreamError{"connection lost", false});
    sink->close();
  }
  link.sinks.clear();
}

}  // namespace itts
