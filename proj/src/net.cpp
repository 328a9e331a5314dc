#include "deepspark/net.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>

#include "deepspark/errors.hpp"

namespace deepspark {

namespace {

std::string errno_str(const char* what) {
  return std::string(what) + ": " + std::strerror(errno);
}

sockaddr_in make_addr(const HostPort& hp) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(hp.port);
  if (inet_pton(AF_INET, hp.host.c_str(), &addr.sin_addr) != 1) {
    throw NetError("bad IPv4 address: " + hp.host);
  }
  return addr;
}

}  // namespace

HostPort parse_hostport(const std::string& s) {
  const size_t colon = s.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == s.size()) {
    throw ContractError("expected host:port, got '" + s + "'");
  }
  HostPort hp;
  hp.host = s.substr(0, colon);
  unsigned port = 0;
  const char* first = s.data() + colon + 1;
  const char* last = s.data() + s.size();
  auto [p, ec] = std::from_chars(first, last, port);
  if (ec != std::errc() || p != last || port > 65535) {
    throw ContractError("bad port in '" + s + "'");
  }
  hp.port = static_cast<uint16_t>(port);
  return hp;
}

Socket::~Socket() { close(); }

Socket& Socket::operator=(Socket&& o) noexcept {
  if (this != &o) {
    close();
    fd_ = o.fd_;
    o.fd_ = -1;
  }
  return *this;
}

void Socket::set_timeouts(int recv_ms, int send_ms) {
  auto set = [&](int opt, int ms) {
    timeval tv{};
    tv.tv_sec = ms / 1000;
    tv.tv_usec = (ms % 1000) * 1000;
    if (setsockopt(fd_, SOL_SOCKET, opt, &tv, sizeof(tv)) != 0) {
      throw NetError(errno_str("setsockopt timeout"));
    }
  };
  set(SO_RCVTIMEO, recv_ms);
  set(SO_SNDTIMEO, send_ms);
}

void Socket::send_all(const void* data, size_t len) {
  const uint8_t* p = static_cast<const uint8_t*>(data);
  while (len > 0) {
    const ssize_t n = ::send(fd_, p, len, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw NetError(errno_str("send"));
    }
    p += n;
    len -= static_cast<size_t>(n);
  }
}

bool Socket::recv_exact_or_eof(void* data, size_t len) {
  uint8_t* p = static_cast<uint8_t*>(data);
  size_t got = 0;
  while (got < len) {
    const ssize_t n = ::recv(fd_, p + got, len - got, 0);
    if (n == 0) {
      if (got == 0) return false;
      throw NetError("connection closed mid-message");
    }
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) throw NetError("recv timed out");
      throw NetError(errno_str("recv"));
    }
    got += static_cast<size_t>(n);
  }
  return true;
}

void Socket::recv_exact(void* data, size_t len) {
  if (!recv_exact_or_eof(data, len)) throw NetError("connection closed");
}

void Socket::shutdown_both() noexcept {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void Socket::close() noexcept {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

TcpListener::TcpListener(const HostPort& addr, int backlog) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw NetError(errno_str("socket"));
  sock_ = Socket(fd);
  const int one = 1;
  setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in sa = make_addr(addr);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
    throw NetError(errno_str(("bind " + addr.host + ":" + std::to_string(addr.port)).c_str()));
  }
  if (::listen(fd, backlog) != 0) throw NetError(errno_str("listen"));
  sockaddr_in bound{};
  socklen_t blen = sizeof(bound);
  if (getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &blen) != 0) {
    throw NetError(errno_str("getsockname"));
  }
  port_ = ntohs(bound.sin_port);
}

std::optional<Socket> TcpListener::accept(int timeout_ms) {
  if (!sock_.valid()) return std::nullopt;
  pollfd pfd{sock_.fd(), POLLIN, 0};
  const int r = ::poll(&pfd, 1, timeout_ms);
  if (r < 0) {
    if (errno == EINTR) return std::nullopt;
    throw NetError(errno_str("poll"));
  }
  if (r == 0) return std::nullopt;
  const int cfd = ::accept(sock_.fd(), nullptr, nullptr);
  if (cfd < 0) {
    // Listener may have been closed concurrently during shutdown.
    if (errno == EBADF || errno == EINVAL || errno == ECONNABORTED || errno == EINTR) {
      return std::nullopt;
    }
    throw NetError(errno_str("accept"));
  }
  const int one = 1;
  setsockopt(cfd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return Socket(cfd);
}

void TcpListener::close() noexcept {
  sock_.shutdown_both();
  sock_.close();
}

Socket tcp_connect(const HostPort& addr, int timeout_ms) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw NetError(errno_str("socket"));
  Socket s(fd);
  sockaddr_in sa = make_addr(addr);
  s.set_timeouts(timeout_ms, timeout_ms);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
    throw NetError(errno_str(("connect " + addr.host + ":" + std::to_string(addr.port)).c_str()));
  }
  const int one = 1;
  setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return s;
}

void write_frame(Socket& s, uint8_t msg_type, std::span<const uint8_t> payload) {
  const std::vector<uint8_t> buf = wire::encode_frame(msg_type, payload);
  s.send_all(buf.data(), buf.size());
}

std::optional<wire::Frame> read_frame(Socket& s) {
  uint8_t hdr[wire::kHeaderSize];
  if (!s.recv_exact_or_eof(hdr, sizeof(hdr))) return std::nullopt;
  const wire::Header h = wire::decode_header(hdr);
  wire::check_header(h);
  wire::Frame f;
  f.msg_type = h.msg_type;
  f.payload.resize(h.payload_len);
  if (h.payload_len > 0) s.recv_exact(f.payload.data(), f.payload.size());
  return f;
}

}  // namespace deepspark
