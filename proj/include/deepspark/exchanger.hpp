#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "deepspark/model.hpp"
#include "deepspark/net.hpp"
#include "deepspark/param_vector.hpp"

namespace deepspark {

// Locked: linearizable read-modify-write of the whole master vector per
// exchange. LockFree: per-element atomic writes only; concurrent exchanges
// may interleave elementwise and no whole-vector consistency holds.
enum class UpdateMode { Locked, LockFree };

UpdateMode parse_update_mode(const std::string& s);  // "locked" | "lockfree"

struct ExchangerConfig {
  std::string bind_address = "127.0.0.1:0";  // port 0 = ephemeral
  uint32_t pool_size = 8;
  float alpha = 0.1f;
  UpdateMode mode = UpdateMode::Locked;
  Model model;
  uint64_t init_seed = 0;
  int idle_timeout_ms = 30000;

  void validate() const;
};

// The master parameter vector plus its counters. Elements live in
// std::atomic<float> so LockFree mode never produces torn 32-bit values;
// Locked mode additionally serializes whole-vector operations via a mutex.
class MasterState {
 public:
  MasterState(uint32_t dim, float alpha, UpdateMode mode, ParamVector initial);

  uint32_t dim() const { return dim_; }
  float alpha() const { return alpha_; }

  // Applies the elastic update against the current master: the response (out)
  // is the worker vector pulled toward the master, the master moves toward
  // the worker by the same elementwise delta.
  void exchange(const float* worker, float* out);

  ParamVector snapshot() const;

  uint64_t exchange_count() const { return exchange_count_.load(std::memory_order_relaxed); }
  uint64_t uptime_ms() const;
  void note_contact(const std::string& peer);
  std::unordered_map<std::string, uint64_t> last_contact_ms() const;

 private:
  uint32_t dim_;
  float alpha_;
  UpdateMode mode_;
  std::unique_ptr<std::atomic<float>[]> params_;
  mutable std::mutex vec_mutex_;  // Locked mode whole-vector critical section
  std::atomic<uint64_t> exchange_count_{0};
  std::chrono::steady_clock::time_point start_;
  mutable std::mutex contact_mutex_;
  std::unordered_map<std::string, uint64_t> last_contact_;
};

// TCP service: one acceptor thread feeds a FIFO admission queue drained by
// pool_size handler threads, one connection per handler at a time. A
// persistent connection occupies its handler slot until it disconnects, so
// size the pool at or above the number of long-lived clients.
class ExchangerService {
 public:
  explicit ExchangerService(ExchangerConfig cfg);
  ~ExchangerService();

  ExchangerService(const ExchangerService&) = delete;
  ExchangerService& operator=(const ExchangerService&) = delete;

  uint16_t port() const { return listener_.port(); }
  const MasterState& master() const { return *master_; }
  uint32_t queue_depth() const;

  // Stops accepting, answers queued connections with ERROR(shutting down),
  // kicks active handlers, and joins all threads. Idempotent.
  void stop();

 private:
  void accept_loop();
  void handler_loop();
  void handle_connection(Socket sock);
  bool serve_frame(Socket& sock, const wire::Frame& frame, const std::string& peer);

  ExchangerConfig cfg_;
  TcpListener listener_;
  std::unique_ptr<MasterState> master_;

  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::vector<std::thread> pool_;

  mutable std::mutex queue_mutex_;
  std::condition_variable queue_cv_;
  std::deque<Socket> queue_;

  std::mutex active_mutex_;
  std::unordered_map<int, Socket*> active_;  // fds of connections being served
};

}  // namespace deepspark
