#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <thread>
#include <vector>

#include "deepspark/client.hpp"
#include "deepspark/errors.hpp"
#include "deepspark/exchanger.hpp"
#include "deepspark/net.hpp"
#include "deepspark/protocol.hpp"
#include "doctest.h"

using namespace deepspark;

namespace {

ExchangerConfig small_config(UpdateMode mode = UpdateMode::Locked, uint32_t pool = 4) {
  ExchangerConfig cfg;
  cfg.bind_address = "127.0.0.1:0";
  cfg.pool_size = pool;
  cfg.alpha = 0.1f;
  cfg.mode = mode;
  cfg.model = Model::softmax(2, 2);  // dim 6
  cfg.init_seed = 424242;
  return cfg;
}

HostPort local(uint16_t port) { return HostPort{"127.0.0.1", port}; }

// The sequential oracle: replays worker vectors against a local master with
// the shared elastic kernel, in the given order.
ParamVector replay(ParamVector master, const std::vector<ParamVector>& workers,
                   const std::vector<size_t>& order, float alpha) {
  for (size_t idx : order) {
    const ParamVector& w = workers[idx];
    float w_out;
    for (size_t i = 0; i < master.size(); ++i) {
      elastic_update_elem(w[i], master[i], alpha, w_out, master[i]);
    }
  }
  return master;
}

ParamVector scripted_vector(size_t dim, uint32_t tag) {
  ParamVector v(dim);
  for (size_t i = 0; i < dim; ++i) {
    v[i] = 0.25f * static_cast<float>(tag + 1) - 0.125f * static_cast<float>(i);
  }
  return v;
}

// Polls until the predicate holds or the deadline passes.
bool eventually(const std::function<bool()>& pred, int deadline_ms = 5000) {
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(deadline_ms);
  while (std::chrono::steady_clock::now() < deadline) {
    if (pred()) return true;
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  return pred();
}

}  // namespace

TEST_SUITE("exchanger") {

TEST_CASE("master state: worked example and counters") {
  MasterState ms(2, 0.1f, UpdateMode::Locked, {0.0f, 0.0f});
  CHECK(ms.dim() == 2);
  CHECK(ms.alpha() == 0.1f);
  CHECK(ms.exchange_count() == 0);

  const float w[] = {1.0f, 2.0f};
  float out[2];
  ms.exchange(w, out);
  CHECK(out[0] == 0.9f);
  CHECK(out[1] == 1.8f);
  CHECK(ms.snapshot() == ParamVector{0.1f, 0.2f});
  CHECK(ms.exchange_count() == 1);

  ms.exchange(w, out);
  CHECK(ms.exchange_count() == 2);
}

TEST_CASE("config validation") {
  CHECK_NOTHROW(small_config().validate());
  auto cfg = small_config();
  cfg.alpha = 0.0f;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = small_config();
  cfg.alpha = 1.0f;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = small_config();
  cfg.pool_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = small_config();
  cfg.model.n_features = 0;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  CHECK_THROWS_AS(parse_update_mode("bananas"), ContractError);
  CHECK(parse_update_mode("locked") == UpdateMode::Locked);
  CHECK(parse_update_mode("lockfree") == UpdateMode::LockFree);
}

TEST_CASE("service: handshake, initial fetch, exchange, stats") {
  ExchangerService svc(small_config());
  ExchangerClient client(local(svc.port()));

  const wire::ConfigMsg config = client.hello();
  CHECK(config.param_dim == 6);
  CHECK(config.alpha == 0.1f);
  CHECK(config.model_fingerprint == Model::softmax(2, 2).fingerprint());

  const ParamVector m0 = client.fetch_initial();
  CHECK(m0 == init_params(Model::softmax(2, 2), 424242));

  // One exchange equals the in-process kernel against the fetched master.
  const ParamVector w = scripted_vector(6, 0);
  const ParamVector resp = client.exchange(w);
  ParamVector expect_w(6), expect_m(6);
  for (size_t i = 0; i < 6; ++i) {
    elastic_update_elem(w[i], m0[i], 0.1f, expect_w[i], expect_m[i]);
  }
  CHECK(resp == expect_w);
  CHECK(svc.master().snapshot() == expect_m);

  const wire::StatsMsg stats = client.stats();
  CHECK(stats.exchange_count == 1);
  CHECK(stats.queue_depth == 0);

  // The response and the master moved by exactly opposite amounts, up to one
  // rounding unit at operand magnitude per side.
  for (size_t i = 0; i < 6; ++i) {
    const double dw = static_cast<double>(resp[i]) - w[i];
    const double dm = static_cast<double>(expect_m[i]) - m0[i];
    const double mag = std::max(std::fabs(static_cast<double>(w[i])),
                                std::fabs(static_cast<double>(m0[i])));
    CHECK(std::fabs(dw + dm) <= 0x1.0p-23 * mag);
  }

  svc.stop();
}

TEST_CASE("service: sequential replay matches the oracle for every order") {
  // Three scripted workers, all 3! arrival orders, fresh service each time:
  // the server-side master must equal the local replay bit for bit.
  const size_t dim = 6;
  std::vector<ParamVector> workers;
  for (uint32_t t = 0; t < 3; ++t) workers.push_back(scripted_vector(dim, t));

  std::vector<size_t> order{0, 1, 2};
  do {
    ExchangerService svc(small_config());
    const ParamVector m0 = svc.master().snapshot();
    for (size_t idx : order) {
      ExchangerClient client(local(svc.port()));
      client.exchange(workers[idx]);
      client.close();
    }
    CHECK(eventually([&] { return svc.master().exchange_count() == 3; }));
    CHECK(svc.master().snapshot() == replay(m0, workers, order, 0.1f));
    svc.stop();
  } while (std::next_permutation(order.begin(), order.end()));
}

TEST_CASE("service: concurrent exchanges match some serialization (locked)") {
  const size_t dim = 6;
  std::vector<ParamVector> workers;
  for (uint32_t t = 0; t < 3; ++t) workers.push_back(scripted_vector(dim, t));

  ExchangerService svc(small_config(UpdateMode::Locked, 4));
  const ParamVector m0 = svc.master().snapshot();

  std::vector<std::thread> threads;
  for (int k = 0; k < 3; ++k) {
    threads.emplace_back([&, k] {
      ExchangerClient client(local(svc.port()));
      client.exchange(workers[static_cast<size_t>(k)]);
    });
  }
  for (auto& t : threads) t.join();
  const ParamVector got = svc.master().snapshot();
  svc.stop();

  std::vector<size_t> order{0, 1, 2};
  bool matched = false;
  do {
    matched = matched || got == replay(m0, workers, order, 0.1f);
  } while (std::next_permutation(order.begin(), order.end()));
  CHECK(matched);
}

TEST_CASE("service: pool of one drains sequential one-shot clients") {
  ExchangerService svc(small_config(UpdateMode::Locked, 1));
  for (int k = 0; k < 5; ++k) {
    ExchangerClient client(local(svc.port()));
    client.exchange(scripted_vector(6, static_cast<uint32_t>(k)));
    client.close();
  }
  CHECK(eventually([&] { return svc.master().exchange_count() == 5; }));
  svc.stop();
}

TEST_CASE("service: saturated pool queues admissions FIFO") {
  ExchangerService svc(small_config(UpdateMode::Locked, 1));

  // First client occupies the only handler slot.
  ExchangerClient holder(local(svc.port()));
  holder.hello();

  // Second client connects and asks; it must wait in the admission queue.
  Socket waiter = tcp_connect(local(svc.port()), 2000);
  write_frame(waiter, wire::kHello, {});
  CHECK(eventually([&] { return svc.queue_depth() == 1; }));

  // Releasing the slot lets the queued connection through.
  holder.close();
  waiter.set_timeouts(5000, 5000);
  const auto reply = read_frame(waiter);
  REQUIRE(reply.has_value());
  CHECK(reply->msg_type == wire::kConfig);
  CHECK(svc.queue_depth() == 0);
  svc.stop();
}

TEST_CASE("lockfree: single handler is bit-identical to locked") {
  std::vector<ParamVector> results;
  for (UpdateMode mode : {UpdateMode::Locked, UpdateMode::LockFree}) {
    ExchangerService svc(small_config(mode, 1));
    for (uint32_t t = 0; t < 4; ++t) {
      ExchangerClient client(local(svc.port()));
      client.exchange(scripted_vector(6, t));
      client.close();
    }
    CHECK(eventually([&] { return svc.master().exchange_count() == 4; }));
    results.push_back(svc.master().snapshot());
    svc.stop();
  }
  CHECK(results[0] == results[1]);
}

TEST_CASE("lockfree: concurrent exchanges stay finite and inside the hull") {
  // Per element the update is a convex blend of the current master and the
  // incoming value, so even interleaved writers cannot escape the per-element
  // hull of everything ever sent (plus f32 rounding).
  auto cfg = small_config(UpdateMode::LockFree, 4);
  cfg.model = Model::softmax(1, 2);  // dim 4
  ExchangerService svc(cfg);
  const size_t dim = 4;
  const ParamVector m0 = svc.master().snapshot();

  constexpr int kWriters = 4;
  constexpr int kRounds = 50;
  std::vector<ParamVector> sent(kWriters);
  for (int k = 0; k < kWriters; ++k) sent[k] = scripted_vector(dim, static_cast<uint32_t>(k));

  std::vector<std::thread> threads;
  for (int k = 0; k < kWriters; ++k) {
    threads.emplace_back([&, k] {
      ExchangerClient client(local(svc.port()));
      ParamVector w = sent[static_cast<size_t>(k)];
      for (int r = 0; r < kRounds; ++r) w = client.exchange(w);
    });
  }
  for (auto& t : threads) t.join();

  const ParamVector final_master = svc.master().snapshot();
  CHECK(eventually([&] { return svc.master().exchange_count() == kWriters * kRounds; }));
  svc.stop();

  REQUIRE(all_finite(final_master));
  double big_m = 0.0;
  for (size_t i = 0; i < dim; ++i) {
    double lo = m0[i], hi = m0[i];
    for (const auto& w : sent) {
      lo = std::min(lo, static_cast<double>(w[i]));
      hi = std::max(hi, static_cast<double>(w[i]));
      big_m = std::max(big_m, std::fabs(static_cast<double>(w[i])));
    }
    const double slack = 1e-5 * std::max(1.0, std::max(std::fabs(lo), std::fabs(hi)));
    CHECK(final_master[i] >= lo - slack);
    CHECK(final_master[i] <= hi + slack);
    // The documented sanity envelope is far looser; implied by the hull
    // bound, asserted anyway as the stated contract.
    const double envelope = 0.1 * 2.0 * big_m * kWriters * kRounds;
    CHECK(std::fabs(final_master[i] - m0[i]) <= envelope);
  }
}

TEST_CASE("errors: dim mismatch keeps the connection and the master intact") {
  ExchangerService svc(small_config());
  const ParamVector before = svc.master().snapshot();

  Socket sock = tcp_connect(local(svc.port()), 2000);
  sock.set_timeouts(5000, 5000);
  write_frame(sock, wire::kExchangeReq, wire::build_params(ParamVector{1.0f, 2.0f}));
  auto reply = read_frame(sock);
  REQUIRE(reply.has_value());
  REQUIRE(reply->msg_type == wire::kError);
  CHECK(wire::parse_error(reply->payload).code == wire::kErrDimMismatch);

  // Same connection still serves valid requests afterwards.
  write_frame(sock, wire::kStatsReq, {});
  reply = read_frame(sock);
  REQUIRE(reply.has_value());
  CHECK(reply->msg_type == wire::kStatsResp);
  CHECK(wire::parse_stats(reply->payload).exchange_count == 0);
  CHECK(svc.master().snapshot() == before);
  svc.stop();
}

TEST_CASE("errors: non-finite payload is rejected, master untouched") {
  ExchangerService svc(small_config());
  const ParamVector before = svc.master().snapshot();

  ParamVector poisoned(6, 1.0f);
  poisoned[3] = std::numeric_limits<float>::quiet_NaN();

  Socket sock = tcp_connect(local(svc.port()), 2000);
  sock.set_timeouts(5000, 5000);
  write_frame(sock, wire::kExchangeReq, wire::build_params(poisoned));
  const auto reply = read_frame(sock);
  REQUIRE(reply.has_value());
  REQUIRE(reply->msg_type == wire::kError);
  CHECK(wire::parse_error(reply->payload).code == wire::kErrNonFinite);
  CHECK(svc.master().snapshot() == before);
  CHECK(svc.master().exchange_count() == 0);
  svc.stop();
}

TEST_CASE("errors: bad magic closes the connection after ERROR 3") {
  ExchangerService svc(small_config());
  Socket sock = tcp_connect(local(svc.port()), 2000);
  sock.set_timeouts(5000, 5000);

  std::vector<uint8_t> junk{'j', 'u', 'n', 'k', 1, 1, 0, 0, 0, 0};
  sock.send_all(junk.data(), junk.size());
  const auto reply = read_frame(sock);
  REQUIRE(reply.has_value());
  REQUIRE(reply->msg_type == wire::kError);
  CHECK(wire::parse_error(reply->payload).code == wire::kErrBadFrame);
  // Unsynchronized stream: the server hangs up.
  const auto eof = read_frame(sock);
  CHECK_FALSE(eof.has_value());
  svc.stop();
}

TEST_CASE("errors: unexpected message type is a bad frame") {
  ExchangerService svc(small_config());
  Socket sock = tcp_connect(local(svc.port()), 2000);
  sock.set_timeouts(5000, 5000);
  write_frame(sock, wire::kConfig, {});  // a reply type sent as a request
  const auto reply = read_frame(sock);
  REQUIRE(reply.has_value());
  REQUIRE(reply->msg_type == wire::kError);
  CHECK(wire::parse_error(reply->payload).code == wire::kErrBadFrame);
  svc.stop();
}

TEST_CASE("errors: truncated params payload is a bad frame") {
  ExchangerService svc(small_config());
  Socket sock = tcp_connect(local(svc.port()), 2000);
  sock.set_timeouts(5000, 5000);
  auto payload = wire::build_params(ParamVector(6, 1.0f));
  payload.pop_back();
  write_frame(sock, wire::kExchangeReq, payload);
  const auto reply = read_frame(sock);
  REQUIRE(reply.has_value());
  REQUIRE(reply->msg_type == wire::kError);
  CHECK(wire::parse_error(reply->payload).code == wire::kErrBadFrame);
  svc.stop();
}

TEST_CASE("shutdown answers queued connections with ERROR 4") {
  ExchangerService svc(small_config(UpdateMode::Locked, 1));
  ExchangerClient holder(local(svc.port()));
  holder.hello();  // pins the only handler

  Socket queued = tcp_connect(local(svc.port()), 2000);
  queued.set_timeouts(5000, 5000);
  write_frame(queued, wire::kHello, {});
  REQUIRE(eventually([&] { return svc.queue_depth() == 1; }));

  svc.stop();
  const auto reply = read_frame(queued);
  REQUIRE(reply.has_value());
  REQUIRE(reply->msg_type == wire::kError);
  CHECK(wire::parse_error(reply->payload).code == wire::kErrShutdown);
}

TEST_CASE("idle connections are reaped") {
  auto cfg = small_config();
  cfg.idle_timeout_ms = 200;
  ExchangerService svc(cfg);
  Socket sock = tcp_connect(local(svc.port()), 2000);
  sock.set_timeouts(5000, 5000);
  write_frame(sock, wire::kHello, {});
  REQUIRE(read_frame(sock).has_value());

  std::this_thread::sleep_for(std::chrono::milliseconds(600));
  // The server has dropped us: either we see EOF right away, or the write
  // lands in a dead socket and the reply never comes.
  bool gone = false;
  try {
    write_frame(sock, wire::kHello, {});
    gone = !read_frame(sock).has_value();
  } catch (const NetError&) {
    gone = true;
  } catch (const ProtocolError&) {
    gone = true;
  }
  CHECK(gone);
  svc.stop();
}

TEST_CASE("binding a busy port fails loudly") {
  ExchangerService svc(small_config());
  auto cfg = small_config();
  cfg.bind_address = "127.0.0.1:" + std::to_string(svc.port());
  CHECK_THROWS_AS(ExchangerService{cfg}, NetError);
  svc.stop();
}

TEST_CASE("stop is idempotent and ends the service") {
  ExchangerService svc(small_config());
  const uint16_t port = svc.port();
  svc.stop();
  svc.stop();
  CHECK_THROWS_AS(tcp_connect(local(port), 300), NetError);
}

TEST_CASE("uptime and contact tracking") {
  ExchangerService svc(small_config());
  ExchangerClient client(local(svc.port()));
  const auto s1 = client.stats();
  std::this_thread::sleep_for(std::chrono::milliseconds(30));
  const auto s2 = client.stats();
  CHECK(s2.uptime_ms >= s1.uptime_ms);
  CHECK(!svc.master().last_contact_ms().empty());
  svc.stop();
}

}  // TEST_SUITE
