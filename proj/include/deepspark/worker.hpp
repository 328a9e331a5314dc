#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "deepspark/engine.hpp"
#include "deepspark/hyperparams.hpp"
#include "deepspark/model.hpp"

namespace deepspark {

struct WorkerConfig {
  std::string exchanger_address;  // host:port
  std::string shard_path;
  Hyperparams hyper;
  uint32_t worker_id = 0;
  uint64_t rng_seed = 0;
  std::string metrics_path;  // CSV log; final params land next to it (.params)

  // When absent, a softmax model is inferred from the shard dimensions. Must
  // agree with the exchanger's model fingerprint either way.
  std::optional<Model> model;

  int connect_timeout_ms = 5000;
};

// Runs the full local training loop against a live exchanger: handshake,
// initial fetch, i_max iterations with exchanges per the period mode, metrics
// flushed to metrics_path. Mid-run exchange failures are retried with
// exponential backoff (3 attempts) before becoming fatal.
LocalRunResult run_worker(const WorkerConfig& cfg);

// Adaptive mode with loss_cut unset (<= 0) resolves it to 20x the loss of the
// first batch at the initial parameters. Returns the hyperparams actually used.
Hyperparams resolve_loss_cut(const Hyperparams& hp, const Model& model, const Dataset& shard,
                             uint64_t sweep_seed, const ParamVector& initial);

// Writes a partition to `dir` as shard_<worker_id>.dshd; returns the path.
std::string spill_shard(const Dataset& partition, uint64_t seed, const std::string& dir,
                        uint32_t worker_id);

// Round-trip-exact plain-text parameter dump, one value per line.
void save_params(const ParamVector& params, const std::string& path);
ParamVector load_params(const std::string& path);

}  // namespace deepspark
