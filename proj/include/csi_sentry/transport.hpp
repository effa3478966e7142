#pragma once

// TCP ingest: each CSI record travels as one frame,
//
//   [u16 big-endian body length][body = encoded CsiPacket]
//
// repeated on a single connection. Capture files on disk use the same framing.

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <ranges>
#include <span>
#include <string>
#include <thread>
#include <type_traits>
#include <utility>
#include <vector>

#include "csi_sentry/error.hpp"
#include "csi_sentry/fifo_queue.hpp"
#include "csi_sentry/wire.hpp"

namespace csi_sentry::transport {

inline constexpr std::uint16_t kDefaultPort = 5501;
inline constexpr std::size_t kFramePrefixSize = 2;

// CSI_SENTRY_PORT overrides the compiled-in default.
inline std::uint16_t default_port() {
  const char* env = std::getenv("CSI_SENTRY_PORT");
  if (env == nullptr || *env == '\0') return kDefaultPort;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 0 || v > 65535) {
    throw Error(Errc::BadConfig, std::string("CSI_SENTRY_PORT is not a port number: ") + env);
  }
  return static_cast<std::uint16_t>(v);
}

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = kDefaultPort;
};

// A length prefix outside this range cannot carry a valid record.
constexpr bool frame_length_plausible(std::size_t n) {
  return n >= wire::kHeaderSize && n <= wire::kMaxRecordSize;
}

inline wire::Bytes frame_bytes(std::span<const std::uint8_t> body) {
  wire::Bytes out;
  out.reserve(kFramePrefixSize + body.size());
  out.push_back(static_cast<std::uint8_t>(body.size() >> 8));
  out.push_back(static_cast<std::uint8_t>(body.size() & 0xff));
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

inline wire::Bytes encode_frame(const wire::CsiPacket& p) { return frame_bytes(wire::encode_packet(p)); }

// ---------------------------------------------------------------------------
// Capture files

inline void write_capture(const std::string& path, std::span<const wire::CsiPacket> packets) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot open " + path + " for writing");
  for (const auto& p : packets) {
    const auto frame = encode_frame(p);
    out.write(reinterpret_cast<const char*>(frame.data()), static_cast<std::streamsize>(frame.size()));
  }
  out.flush();
  if (!out) throw Error(Errc::IoFailure, "write failed on " + path);
}

// Returns the frame bodies in file order. A trailing partial frame is an error.
inline std::vector<wire::Bytes> read_capture_frames(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path);
  std::vector<wire::Bytes> frames;
  std::uint8_t prefix[kFramePrefixSize];
  while (in.read(reinterpret_cast<char*>(prefix), kFramePrefixSize)) {
    const std::size_t n = (static_cast<std::size_t>(prefix[0]) << 8) | prefix[1];
    wire::Bytes body(n);
    if (!in.read(reinterpret_cast<char*>(body.data()), static_cast<std::streamsize>(n))) {
      throw Error(Errc::Truncated, path + ": frame " + std::to_string(frames.size()) + " is cut short");
    }
    frames.push_back(std::move(body));
  }
  if (in.gcount() != 0) throw Error(Errc::Truncated, path + ": dangling frame prefix");
  return frames;
}

inline std::vector<wire::CsiPacket> read_capture(const std::string& path) {
  std::vector<wire::CsiPacket> packets;
  for (const auto& body : read_capture_frames(path)) packets.push_back(wire::decode_packet(body));
  return packets;
}

// ---------------------------------------------------------------------------
// Sockets

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~Socket() { reset(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

namespace detail {

struct AddrInfoDeleter {
  void operator()(addrinfo* ai) const { ::freeaddrinfo(ai); }
};

inline std::unique_ptr<addrinfo, AddrInfoDeleter> resolve(const Endpoint& ep, bool passive, Errc on_error) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = passive ? AI_PASSIVE : 0;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(ep.port);
  const int rc = ::getaddrinfo(ep.host.empty() ? nullptr : ep.host.c_str(), port.c_str(), &hints, &res);
  if (rc != 0) throw Error(on_error, "cannot resolve " + ep.host + ": " + ::gai_strerror(rc));
  return std::unique_ptr<addrinfo, AddrInfoDeleter>(res);
}

// Waits until fd is readable or timeout_ms elapses. Returns false on timeout.
inline bool wait_readable(int fd, int timeout_ms) {
  pollfd pfd{fd, POLLIN, 0};
  for (;;) {
    const int rc = ::poll(&pfd, 1, timeout_ms);
    if (rc < 0 && errno == EINTR) continue;
    return rc > 0;
  }
}

inline bool send_all(int fd, std::span<const std::uint8_t> data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    off += static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Server

struct IngestStats {
  std::size_t received = 0;
  std::size_t decoded = 0;
  std::size_t decode_errors = 0;
  std::size_t dropped = 0;

  bool operator==(const IngestStats&) const = default;
};

enum class OverflowPolicy { Block, Drop };

struct IngestOptions {
  std::size_t queue_capacity = 256;
  OverflowPolicy overflow = OverflowPolicy::Block;
  // Stop once the first client disconnects instead of accepting the next one.
  bool single_client = false;
  // Stop after this many decoded packets (0 = no limit).
  std::size_t max_packets = 0;
  int poll_interval_ms = 50;
};

using PacketSink = std::function<void(wire::CsiPacket&&)>;

// Single-client TCP ingest server. The socket reader decodes frames onto a
// bounded queue; a consumer thread drains the queue into the sink in arrival
// order. Clients are served one at a time; when one disconnects the server
// accepts the next.
class IngestServer {
 public:
  IngestServer(const Endpoint& ep, IngestOptions options = {}) : options_(options) {
    if (options.queue_capacity == 0) throw Error(Errc::BadConfig, "queue capacity must be >= 1");
    auto ai = detail::resolve(ep, true, Errc::BindFailure);
    listener_ = Socket(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
    if (!listener_.valid()) throw Error(Errc::BindFailure, std::string("socket: ") + std::strerror(errno));
    const int one = 1;
    ::setsockopt(listener_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(listener_.fd(), ai->ai_addr, ai->ai_addrlen) != 0) {
      throw Error(Errc::BindFailure, ep.host + ":" + std::to_string(ep.port) + ": " + std::strerror(errno));
    }
    if (::listen(listener_.fd(), 1) != 0) {
      throw Error(Errc::BindFailure, std::string("listen: ") + std::strerror(errno));
    }
    sockaddr_in addr{};
    socklen_t len = sizeof addr;
    ::getsockname(listener_.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
  }

  std::uint16_t port() const { return port_; }

  // Safe to call from any thread or a signal-driven watcher.
  void request_stop() { stop_.store(true); }

  IngestStats stats() const {
    return {received_.load(), decoded_.load(), decode_errors_.load(), dropped_.load()};
  }

  // Blocks until stopped. Queued packets are drained into the sink before
  // returning. An exception thrown by the sink stops the server and is
  // rethrown here.
  IngestStats run(const PacketSink& sink) {
    FifoQueue<wire::CsiPacket> queue(options_.queue_capacity);
    std::exception_ptr sink_error;
    std::thread consumer([&] {
      try {
        for (;;) sink(queue.pop());
      } catch (const Error& e) {
        if (e.code() != Errc::Closed) {
          sink_error = std::current_exception();
          request_stop();
          queue.close();
        }
      } catch (...) {
        sink_error = std::current_exception();
        request_stop();
        queue.close();
      }
    });

    try {
      while (!stop_.load()) {
        if (!detail::wait_readable(listener_.fd(), options_.poll_interval_ms)) continue;
        Socket client(::accept(listener_.fd(), nullptr, nullptr));
        if (!client.valid()) continue;
        serve_client(client, queue);
        if (options_.single_client) break;
      }
    } catch (const Error& e) {
      if (e.code() != Errc::Closed) {
        queue.close();
        consumer.join();
        throw;
      }
    }
    queue.close();
    consumer.join();
    if (sink_error) std::rethrow_exception(sink_error);
    return stats();
  }

 private:
  // Reads exactly n bytes, polling so a stop request is noticed. Returns false
  // on disconnect or stop.
  bool read_exact(int fd, std::uint8_t* dst, std::size_t n) {
    std::size_t got = 0;
    while (got < n) {
      if (stop_.load()) return false;
      if (!detail::wait_readable(fd, options_.poll_interval_ms)) continue;
      const ssize_t r = ::recv(fd, dst + got, n - got, 0);
      if (r < 0 && errno == EINTR) continue;
      if (r <= 0) return false;
      got += static_cast<std::size_t>(r);
    }
    return true;
  }

  void serve_client(const Socket& client, FifoQueue<wire::CsiPacket>& queue) {
    std::uint8_t prefix[kFramePrefixSize];
    std::uint8_t body[wire::kMaxRecordSize];
    while (!stop_.load()) {
      if (!read_exact(client.fd(), prefix, kFramePrefixSize)) return;
      const std::size_t n = (static_cast<std::size_t>(prefix[0]) << 8) | prefix[1];
      // A bad prefix means framing is lost; drop this connection only.
      if (!frame_length_plausible(n)) return;
      if (!read_exact(client.fd(), body, n)) return;
      received_.fetch_add(1);
      std::optional<wire::CsiPacket> packet;
      try {
        packet = wire::decode_packet(std::span<const std::uint8_t>(body, n));
      } catch (const Error&) {
        decode_errors_.fetch_add(1);
        continue;
      }
      decoded_.fetch_add(1);
      if (options_.overflow == OverflowPolicy::Block) {
        queue.push(std::move(*packet));
      } else if (!queue.try_push(std::move(*packet))) {
        dropped_.fetch_add(1);
      }
      if (options_.max_packets != 0 && decoded_.load() >= options_.max_packets) {
        request_stop();
        return;
      }
    }
  }

  IngestOptions options_;
  Socket listener_;
  std::uint16_t port_ = 0;
  std::atomic<bool> stop_{false};
  std::atomic<std::size_t> received_{0};
  std::atomic<std::size_t> decoded_{0};
  std::atomic<std::size_t> decode_errors_{0};
  std::atomic<std::size_t> dropped_{0};
};

inline IngestStats run_ingest_server(const Endpoint& ep, std::size_t queue_capacity, const PacketSink& sink,
                                     IngestOptions options = {}) {
  options.queue_capacity = queue_capacity;
  IngestServer server(ep, options);
  return server.run(sink);
}

// ---------------------------------------------------------------------------
// Client

// Thrown when the peer goes away mid-stream; carries how many frames made it out.
class ConnectionLost : public Error {
 public:
  ConnectionLost(std::size_t sent, const std::string& what) : Error(Errc::ConnectionLost, what), sent_(sent) {}
  std::size_t sent() const { return sent_; }

 private:
  std::size_t sent_;
};

class FrameSender {
 public:
  explicit FrameSender(const Endpoint& ep) {
    auto ai = detail::resolve(ep, false, Errc::ConnectFailure);
    sock_ = Socket(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
    if (!sock_.valid() || ::connect(sock_.fd(), ai->ai_addr, ai->ai_addrlen) != 0) {
      throw Error(Errc::ConnectFailure, ep.host + ":" + std::to_string(ep.port) + ": " + std::strerror(errno));
    }
    const int one = 1;
    ::setsockopt(sock_.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  }

  // Sends one framed body. False if the connection is gone.
  bool send_body(std::span<const std::uint8_t> body) { return detail::send_all(sock_.fd(), frame_bytes(body)); }

  bool send(const wire::CsiPacket& p) { return send_body(wire::encode_packet(p)); }

  // True once the peer has closed its side.
  bool peer_closed() {
    pollfd pfd{sock_.fd(), POLLIN, 0};
    if (::poll(&pfd, 1, 0) <= 0) return false;
    if (pfd.revents & (POLLHUP | POLLERR)) return true;
    std::uint8_t b;
    return ::recv(sock_.fd(), &b, 1, MSG_PEEK | MSG_DONTWAIT) == 0;
  }

 private:
  Socket sock_;
};

// Sends each item of `source` as one frame, pacing frame i to start + i/rate_hz.
// rate_hz <= 0 disables pacing. Items may be CsiPacket or pre-encoded bodies.
template <std::ranges::input_range Source>
std::size_t stream_packets(const Endpoint& ep, Source&& source, double rate_hz) {
  FrameSender sender(ep);
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  const auto at = [&](std::size_t i) {
    return start + std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(i / rate_hz));
  };
  std::size_t sent = 0;
  for (auto&& item : source) {
    if (rate_hz > 0) std::this_thread::sleep_until(at(sent));
    bool ok;
    if constexpr (std::is_same_v<std::remove_cvref_t<decltype(item)>, wire::CsiPacket>) {
      ok = !sender.peer_closed() && sender.send(item);
    } else {
      ok = !sender.peer_closed() && sender.send_body(item);
    }
    if (!ok) throw ConnectionLost(sent, "peer closed after " + std::to_string(sent) + " frames");
    ++sent;
  }
  if (rate_hz > 0 && sent > 0) std::this_thread::sleep_until(at(sent));
  return sent;
}

}  // namespace csi_sentry::transport
