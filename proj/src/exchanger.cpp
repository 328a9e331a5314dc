#include "deepspark/exchanger.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>

#include <cmath>

#include "deepspark/errors.hpp"
#include "deepspark/log.hpp"

namespace deepspark {

namespace {

std::string peer_name(const Socket& s) {
  sockaddr_in sa{};
  socklen_t len = sizeof(sa);
  if (getpeername(s.fd(), reinterpret_cast<sockaddr*>(&sa), &len) != 0) return "?";
  char buf[INET_ADDRSTRLEN] = {};
  inet_ntop(AF_INET, &sa.sin_addr, buf, sizeof(buf));
  return std::string(buf) + ":" + std::to_string(ntohs(sa.sin_port));
}

void try_send_error(Socket& s, uint16_t code, const std::string& msg) {
  try {
    write_frame(s, wire::kError, wire::build_error(code, msg));
  } catch (const std::exception&) {
    // Peer already gone; nothing to report to.
  }
}

// Closing with unread bytes in the receive buffer makes the kernel send RST,
// which can destroy an ERROR frame still in flight. When we reject a frame
// without consuming its payload, half-close the write side and drain briefly
// (bounded) so the peer reliably sees the error before our FIN.
void lingering_close(Socket& s) noexcept {
  ::shutdown(s.fd(), SHUT_WR);
  s.set_timeouts(1000, 1000);
  char buf[16384];
  for (int i = 0; i < 64; ++i) {  // cap the drain at 1 MiB
    const ssize_t n = ::recv(s.fd(), buf, sizeof(buf), 0);
    if (n <= 0) break;
  }
}

}  // namespace

UpdateMode parse_update_mode(const std::string& s) {
  if (s == "locked") return UpdateMode::Locked;
  if (s == "lockfree") return UpdateMode::LockFree;
  throw ContractError("update mode must be 'locked' or 'lockfree', got '" + s + "'");
}

void ExchangerConfig::validate() const {
  if (pool_size < 1) throw ContractError("exchanger: pool_size must be >= 1");
  if (!(alpha > 0.0f && alpha < 1.0f)) throw ContractError("exchanger: alpha must be in (0,1)");
  model.validate();
  if (model.param_dim() > (wire::kMaxPayload - 4) / 4) {
    throw ContractError("exchanger: model too large for one wire frame");
  }
  if (idle_timeout_ms <= 0) throw ContractError("exchanger: idle_timeout_ms must be positive");
}

MasterState::MasterState(uint32_t dim, float alpha, UpdateMode mode, ParamVector initial)
    : dim_(dim),
      alpha_(alpha),
      mode_(mode),
      params_(new std::atomic<float>[dim]),
      start_(std::chrono::steady_clock::now()) {
  if (initial.size() != dim) throw ContractError("master: initial vector dim mismatch");
  require_finite(initial, "master initial params");
  for (uint32_t i = 0; i < dim_; ++i) params_[i].store(initial[i], std::memory_order_relaxed);
}

void MasterState::exchange(const float* worker, float* out) {
  auto apply = [&] {
    for (uint32_t i = 0; i < dim_; ++i) {
      float m_new;
      elastic_update_elem(worker[i], params_[i].load(std::memory_order_relaxed), alpha_, out[i],
                          m_new);
      params_[i].store(m_new, std::memory_order_relaxed);
    }
  };
  if (mode_ == UpdateMode::Locked) {
    std::lock_guard<std::mutex> lk(vec_mutex_);
    apply();
  } else {
    apply();
  }
  exchange_count_.fetch_add(1, std::memory_order_relaxed);
}

ParamVector MasterState::snapshot() const {
  ParamVector out(dim_);
  auto copy = [&] {
    for (uint32_t i = 0; i < dim_; ++i) out[i] = params_[i].load(std::memory_order_relaxed);
  };
  if (mode_ == UpdateMode::Locked) {
    std::lock_guard<std::mutex> lk(vec_mutex_);
    copy();
  } else {
    copy();
  }
  return out;
}

uint64_t MasterState::uptime_ms() const {
  return static_cast<uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                   std::chrono::steady_clock::now() - start_)
                                   .count());
}

void MasterState::note_contact(const std::string& peer) {
  std::lock_guard<std::mutex> lk(contact_mutex_);
  last_contact_[peer] = uptime_ms();
}

std::unordered_map<std::string, uint64_t> MasterState::last_contact_ms() const {
  std::lock_guard<std::mutex> lk(contact_mutex_);
  return last_contact_;
}

ExchangerService::ExchangerService(ExchangerConfig cfg)
    : cfg_(std::move(cfg)), listener_(parse_hostport(cfg_.bind_address)) {
  cfg_.validate();
  const uint32_t dim = static_cast<uint32_t>(cfg_.model.param_dim());
  master_ = std::make_unique<MasterState>(dim, cfg_.alpha, cfg_.mode,
                                          init_params(cfg_.model, cfg_.init_seed));
  acceptor_ = std::thread([this] { accept_loop(); });
  pool_.reserve(cfg_.pool_size);
  for (uint32_t i = 0; i < cfg_.pool_size; ++i) {
    pool_.emplace_back([this] { handler_loop(); });
  }
  DS_LOG_INFO << "exchanger listening on port " << listener_.port() << " dim=" << dim
              << " pool=" << cfg_.pool_size
              << " mode=" << (cfg_.mode == UpdateMode::Locked ? "locked" : "lockfree");
}

ExchangerService::~ExchangerService() { stop(); }

uint32_t ExchangerService::queue_depth() const {
  std::lock_guard<std::mutex> lk(queue_mutex_);
  return static_cast<uint32_t>(queue_.size());
}

void ExchangerService::stop() {
  if (stopping_.exchange(true)) {
    if (acceptor_.joinable()) acceptor_.join();
    for (auto& t : pool_)
      if (t.joinable()) t.join();
    return;
  }
  listener_.close();
  queue_cv_.notify_all();
  {
    std::lock_guard<std::mutex> lk(active_mutex_);
    for (auto& [fd, sock] : active_) sock->shutdown_both();
  }
  if (acceptor_.joinable()) acceptor_.join();
  for (auto& t : pool_)
    if (t.joinable()) t.join();
  DS_LOG_INFO << "exchanger stopped after " << master_->exchange_count() << " exchanges";
}

void ExchangerService::accept_loop() {
  while (!stopping_.load(std::memory_order_relaxed)) {
    std::optional<Socket> s;
    try {
      s = listener_.accept(100);
    } catch (const NetError& e) {
      if (stopping_.load(std::memory_order_relaxed)) break;
      DS_LOG_ERROR << "accept failed: " << e.what();
      continue;
    }
    if (!s) continue;
    {
      std::lock_guard<std::mutex> lk(queue_mutex_);
      queue_.push_back(std::move(*s));
    }
    queue_cv_.notify_one();
  }
}

void ExchangerService::handler_loop() {
  while (true) {
    Socket sock;
    {
      std::unique_lock<std::mutex> lk(queue_mutex_);
      queue_cv_.wait(lk, [&] { return stopping_.load() || !queue_.empty(); });
      if (queue_.empty()) return;  // stopping and fully drained
      sock = std::move(queue_.front());
      queue_.pop_front();
    }
    if (stopping_.load()) {
      try_send_error(sock, wire::kErrShutdown, "exchanger shutting down");
      lingering_close(sock);  // a queued peer may have an unread request in flight
      continue;
    }
    try {
      handle_connection(std::move(sock));
    } catch (const std::exception& e) {
      DS_LOG_ERROR << "handler error: " << e.what();
    }
  }
}

void ExchangerService::handle_connection(Socket sock) {
  const std::string peer = peer_name(sock);
  sock.set_timeouts(cfg_.idle_timeout_ms, cfg_.idle_timeout_ms);
  {
    std::lock_guard<std::mutex> lk(active_mutex_);
    active_[sock.fd()] = &sock;
  }
  DS_LOG_DEBUG << "connection from " << peer;
  bool reject_close = false;  // closing on an error the peer still has to read
  while (true) {
    std::optional<wire::Frame> frame;
    try {
      frame = read_frame(sock);
    } catch (const ProtocolError& e) {
      try_send_error(sock, e.code(), e.what());
      reject_close = true;
      break;
    } catch (const NetError&) {
      break;  // idle timeout, reset, or shutdown kick
    }
    if (!frame) break;  // clean close
    if (stopping_.load(std::memory_order_relaxed)) {
      try_send_error(sock, wire::kErrShutdown, "exchanger shutting down");
      reject_close = true;
      break;
    }
    master_->note_contact(peer);
    bool keep_open = false;
    try {
      keep_open = serve_frame(sock, *frame, peer);
    } catch (const ProtocolError& e) {
      try_send_error(sock, e.code(), e.what());
      keep_open = e.code() != wire::kErrBadFrame;
      reject_close = !keep_open;
    } catch (const NetError&) {
      keep_open = false;
    }
    if (!keep_open) break;
  }
  if (reject_close) lingering_close(sock);
  {
    std::lock_guard<std::mutex> lk(active_mutex_);
    active_.erase(sock.fd());
  }
  DS_LOG_DEBUG << "connection " << peer << " closed";
}

bool ExchangerService::serve_frame(Socket& sock, const wire::Frame& frame,
                                   const std::string& peer) {
  switch (frame.msg_type) {
    case wire::kHello: {
      wire::ConfigMsg cfg;
      cfg.param_dim = master_->dim();
      cfg.alpha = master_->alpha();
      cfg.model_fingerprint = cfg_.model.fingerprint();
      write_frame(sock, wire::kConfig, wire::build_config(cfg));
      return true;
    }
    case wire::kFetchInit: {
      const ParamVector snap = master_->snapshot();
      write_frame(sock, wire::kInitParams, wire::build_params(snap));
      return true;
    }
    case wire::kExchangeReq: {
      const std::vector<float> worker = wire::parse_params(frame.payload);
      if (worker.size() != master_->dim()) {
        throw ProtocolError(wire::kErrDimMismatch,
                            "worker dim " + std::to_string(worker.size()) + " != master dim " +
                                std::to_string(master_->dim()));
      }
      if (!all_finite(worker)) {
        throw ProtocolError(wire::kErrNonFinite, "worker payload contains non-finite values");
      }
      std::vector<float> updated(worker.size());
      master_->exchange(worker.data(), updated.data());
      write_frame(sock, wire::kExchangeResp, wire::build_params(updated));
      DS_LOG_DEBUG << "exchange #" << master_->exchange_count() << " with " << peer;
      return true;
    }
    case wire::kStatsReq: {
      wire::StatsMsg m;
      m.exchange_count = master_->exchange_count();
      m.queue_depth = queue_depth();
      m.uptime_ms = master_->uptime_ms();
      write_frame(sock, wire::kStatsResp, wire::build_stats(m));
      return true;
    }
    default:
      throw ProtocolError(wire::kErrBadFrame,
                          "unexpected message type " + std::to_string(frame.msg_type));
  }
}

}  // namespace deepspark
