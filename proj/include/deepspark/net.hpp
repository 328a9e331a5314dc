#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "deepspark/protocol.hpp"

// Thin RAII layer over BSD sockets plus frame-at-a-time I/O for the wire
// protocol. Everything throws NetError on transport failure; frame parsing
// throws ProtocolError.

namespace deepspark {

struct HostPort {
  std::string host;
  uint16_t port = 0;
};

// Parses "host:port"; throws ContractError on malformed input.
HostPort parse_hostport(const std::string& s);

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket();
  Socket(Socket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
  Socket& operator=(Socket&& o) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  bool valid() const { return fd_ >= 0; }
  int fd() const { return fd_; }

  // SO_RCVTIMEO / SO_SNDTIMEO; 0 disables the timeout.
  void set_timeouts(int recv_ms, int send_ms);

  void send_all(const void* data, size_t len);

  // Reads exactly len bytes. Returns false only on clean EOF before the first
  // byte; throws NetError on errors, timeouts, or EOF mid-read.
  bool recv_exact_or_eof(void* data, size_t len);
  void recv_exact(void* data, size_t len);

  // Half-closes both directions; any thread blocked in recv wakes up.
  void shutdown_both() noexcept;
  void close() noexcept;

 private:
  int fd_ = -1;
};

class TcpListener {
 public:
  // Binds and listens; port 0 picks an ephemeral port. Throws NetError.
  explicit TcpListener(const HostPort& addr, int backlog = 64);

  uint16_t port() const { return port_; }

  // Waits up to timeout_ms for a connection; nullopt on timeout or after
  // close(). Throws NetError on unexpected failure.
  std::optional<Socket> accept(int timeout_ms);

  void close() noexcept;

 private:
  Socket sock_;
  uint16_t port_ = 0;
};

Socket tcp_connect(const HostPort& addr, int timeout_ms = 5000);

// --- frame I/O ---------------------------------------------------------------

void write_frame(Socket& s, uint8_t msg_type, std::span<const uint8_t> payload);

// nullopt on clean EOF at a frame boundary; ProtocolError(kErrBadFrame) on a
// bad header (the stream is unsynchronized afterwards — callers must close).
std::optional<wire::Frame> read_frame(Socket& s);

}  // namespace deepspark
