#include "deepspark/worker.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include "deepspark/client.hpp"
#include "deepspark/errors.hpp"
#include "deepspark/log.hpp"
#include "deepspark/metrics.hpp"
#include "deepspark/shard.hpp"

namespace deepspark {

Hyperparams resolve_loss_cut(const Hyperparams& hp, const Model& model, const Dataset& shard,
                             uint64_t sweep_seed, const ParamVector& initial) {
  Hyperparams out = hp;
  if (out.period_mode != PeriodMode::Adaptive || out.loss_cut > 0.0) return out;
  ShardSweeper sweeper(shard, out.batch_size, sweep_seed);
  Minibatch first;
  sweeper.next(first);
  const double l0 = loss_only(model, initial, first);
  out.loss_cut = 20.0 * l0;
  DS_LOG_INFO << "adaptive loss_cut resolved to " << out.loss_cut << " (20 x first-batch loss "
              << l0 << ")";
  return out;
}

namespace {

// Handshake + config validation; throws before training on any mismatch.
void validate_against_server(const wire::ConfigMsg& remote, const Model& model,
                             const Hyperparams& hp) {
  if (remote.param_dim != model.param_dim()) {
    throw ContractError("exchanger serves dim " + std::to_string(remote.param_dim) +
                        " but local model has " + std::to_string(model.param_dim()));
  }
  if (remote.model_fingerprint != model.fingerprint()) {
    throw ContractError("model fingerprint mismatch with exchanger (different architecture?)");
  }
  if (remote.alpha != static_cast<float>(hp.alpha)) {
    throw ContractError("exchanger applies alpha=" + std::to_string(remote.alpha) +
                        " but worker was configured with alpha=" + std::to_string(hp.alpha));
  }
}

}  // namespace

LocalRunResult run_worker(const WorkerConfig& cfg) {
  const ShardData shard = read_shard(cfg.shard_path);
  const Model model = cfg.model ? *cfg.model
                                : Model::softmax(shard.data.n_features, shard.data.n_classes);
  if (shard.data.n_features != model.n_features || shard.data.n_classes > model.n_classes) {
    throw ContractError("shard dimensions do not fit the model");
  }

  const HostPort addr = parse_hostport(cfg.exchanger_address);
  auto client = std::make_unique<ExchangerClient>(addr, cfg.connect_timeout_ms);
  validate_against_server(client->hello(), model, cfg.hyper);
  ParamVector initial = client->fetch_initial();

  const Hyperparams hp = resolve_loss_cut(cfg.hyper, model, shard.data, cfg.rng_seed, initial);
  hp.validate();

  // Reconnect-and-retry wrapper around the blocking exchange round-trip.
  uint64_t exchange_no = 0;
  ExchangeFn exchange = [&](const ParamVector& w) -> ParamVector {
    ++exchange_no;
    for (int attempt = 0;; ++attempt) {
      try {
        return client->exchange(w);
      } catch (const NetError& e) {
        if (attempt >= 2) throw;
        const auto backoff = std::chrono::milliseconds(100 << attempt);
        DS_LOG_INFO << "worker " << cfg.worker_id << " exchange " << exchange_no << " failed ("
                    << e.what() << "); retrying in " << backoff.count() << " ms";
        std::this_thread::sleep_for(backoff);
        client = std::make_unique<ExchangerClient>(addr, cfg.connect_timeout_ms);
        validate_against_server(client->hello(), model, hp);
      }
    }
  };

  DS_LOG_INFO << "worker " << cfg.worker_id << " training: " << shard.data.size()
              << " samples, dim " << model.param_dim() << ", i_max " << hp.i_max;
  LocalRunResult result =
      run_training_loop(model, shard.data, hp, cfg.rng_seed, std::move(initial), exchange);

  if (!cfg.metrics_path.empty()) {
    write_train_log(result.log, cfg.metrics_path);
    save_params(result.final_params,
                std::filesystem::path(cfg.metrics_path).replace_extension(".params").string());
  }
  return result;
}

std::string spill_shard(const Dataset& partition, uint64_t seed, const std::string& dir,
                        uint32_t worker_id) {
  partition.validate();
  std::filesystem::create_directories(dir);
  const std::string path =
      (std::filesystem::path(dir) / ("shard_" + std::to_string(worker_id) + ".dshd")).string();
  write_shard(partition, path, seed);
  return path;
}

void save_params(const ParamVector& params, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  char buf[64];
  for (float v : params) {
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.write(buf, p - buf);
    out.put('\n');
  }
  if (!out.flush()) {
    out.close();
    std::remove(path.c_str());
    throw IoError("write failed for " + path);
  }
}

ParamVector load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  ParamVector out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    float v = 0.0f;
    auto [p, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
    if (ec != std::errc() || p != line.data() + line.size()) {
      throw ParseError(lineno, "bad float '" + line + "'");
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace deepspark
