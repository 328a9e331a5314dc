#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "deepspark/dataset.hpp"
#include "deepspark/engine.hpp"
#include "deepspark/hyperparams.hpp"
#include "deepspark/metrics.hpp"
#include "deepspark/model.hpp"

namespace deepspark {

// Deterministic in-process emulation of n workers plus the master under a
// virtual clock: an iteration costs batch_cost_C (times the worker's
// multiplier), an exchange additionally costs comm_cost_S. AsyncEASGD
// interleaves per-worker completion events in seeded order and applies the
// elastic update against the live master at each worker's exchange time;
// Synchronous barriers every iteration and steps the master by the averaged
// gradient, each round costing the slowest worker plus comm.
enum class SimMode { Synchronous, AsyncEASGD };

struct SimConfig {
  uint32_t n_workers = 1;
  Hyperparams hyper;
  Model model;
  Dataset dataset;
  SimMode mode = SimMode::AsyncEASGD;

  double batch_cost_C = 1.0;  // virtual time units per minibatch
  double comm_cost_S = 0.0;   // virtual time units per exchange
  std::vector<double> cost_multipliers;  // per-worker; empty = all 1.0

  uint64_t schedule_seed = 0;  // event-order tiebreaks
  uint64_t init_seed = 0;      // master parameter init
  uint64_t data_seed = 0;      // holdout split, partition, sweep orders

  // Held-out evaluation of the master every eval_every per-worker iterations
  // (including iteration 0).
  uint32_t eval_every = 50;
  double holdout_frac = 0.2;

  // Every worker trains on a full copy of the training split with the same
  // sweep order instead of a disjoint shard — collapses n workers onto
  // identical inputs, which is what the synchronous-averaging oracle needs.
  bool replicate_shards = false;

  // Keep a copy of the master after every exchange (memory grows with the
  // exchange count; sweeps over many runs can turn this off).
  bool record_master_snaps = true;

  void validate() const;
};

// Derived seeds, exposed so tests can reproduce a simulated worker exactly.
uint64_t sim_sweep_seed(const SimConfig& cfg, uint32_t worker);
uint64_t sim_partition_seed(const SimConfig& cfg);
uint64_t sim_holdout_seed(const SimConfig& cfg);

struct EvalPoint {
  double virtual_time = 0.0;
  uint64_t per_worker_iter = 0;  // min over workers at evaluation time
  double accuracy = 0.0;
};

struct MasterSnap {
  double virtual_time = 0.0;
  uint32_t worker = 0;  // who exchanged
  ParamVector params;   // master right after the exchange
};

struct SimResult {
  uint32_t n_workers = 0;
  std::vector<TrainLog> worker_logs;
  std::vector<ParamVector> worker_final_params;
  std::vector<MasterSnap> master_snaps;
  ParamVector final_master;
  double virtual_clock_total = 0.0;
  uint64_t iterations_per_worker = 0;
  std::vector<EvalPoint> eval_curve;
};

SimResult simulate(const SimConfig& cfg);

// First per-worker iteration count whose evaluation met the target accuracy;
// nullopt when the run never got there.
std::optional<uint64_t> iterations_to_accuracy(const SimResult& result, double target);

// Discrepancy penalty: total cluster iterations to hit the target relative to
// the single-worker baseline, d = n * iters(async) / baseline_N. Throws
// ContractError when the run never reached the target.
double estimate_d(const SimResult& async_result, uint64_t baseline_N, double target);

}  // namespace deepspark
