#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include "deepspark/dataset.hpp"
#include "deepspark/hyperparams.hpp"
#include "deepspark/metrics.hpp"
#include "deepspark/model.hpp"
#include "deepspark/param_vector.hpp"
#include "deepspark/rng.hpp"

namespace deepspark {

// Sequential sweep over a shard with a seeded reshuffle per epoch. Every
// sample is visited exactly once per epoch; the final batch of an epoch may
// be short but never empty.
class ShardSweeper {
 public:
  ShardSweeper(const Dataset& shard, uint32_t batch_size, uint64_t seed);

  void next(Minibatch& out);
  uint64_t epoch() const { return epoch_; }

 private:
  void reshuffle();

  const Dataset* shard_;
  uint32_t batch_size_;
  uint64_t seed_;
  uint64_t epoch_ = 0;
  size_t pos_ = 0;
  std::vector<uint32_t> order_;
};

// Decides when to exchange: every tau iterations (Fixed) or whenever the
// cumulated loss L exceeds loss_cut (Adaptive). L resets to zero on every
// exchange; the check runs after each iteration's loss accumulation.
class ExchangePolicy {
 public:
  explicit ExchangePolicy(const Hyperparams& hp)
      : mode_(hp.period_mode), tau_(hp.tau), loss_cut_(hp.loss_cut) {}

  struct Decision {
    bool exchange = false;
    uint32_t period_len = 0;  // set only when exchange is true
  };

  Decision on_iteration(double batch_loss);
  double cumulated() const { return cumulated_; }

 private:
  PeriodMode mode_;
  uint32_t tau_;
  double loss_cut_;
  double cumulated_ = 0.0;
  uint32_t since_exchange_ = 0;
};

// Exchange fires strictly when L exceeds the threshold (> not >=).
inline bool should_exchange(double cumulated_loss, double loss_cut) {
  return cumulated_loss > loss_cut;
}

// One worker's local SGD state: parameters, sweep order, and the step rule.
// The real worker and the simulator both drive this, which is what makes a
// simulated worker iteration bit-identical to a standalone one.
class SgdEngine {
 public:
  SgdEngine(Model model, const Dataset& shard, const Hyperparams& hp, uint64_t sweep_seed,
            ParamVector initial);

  // Runs one iteration: draw batch, loss+grad, optional L2 term, SGD step.
  double step();

  const ParamVector& params() const { return params_; }
  void set_params(ParamVector p);
  const Model& model() const { return model_; }
  uint64_t iterations() const { return iter_; }

 private:
  Model model_;
  const Dataset* shard_;
  Hyperparams hp_;
  ShardSweeper sweeper_;
  ParamVector params_;
  ParamVector grad_;
  Minibatch batch_;
  uint64_t iter_ = 0;
};

// Full local training loop shared by the networked worker and test oracles.
// `exchange` is invoked with the current parameters whenever the policy
// fires and must return the refreshed vector; pass nullptr to never exchange.
struct LocalRunResult {
  TrainLog log;
  ParamVector final_params;
};

using ExchangeFn = std::function<ParamVector(const ParamVector&)>;

LocalRunResult run_training_loop(const Model& model, const Dataset& shard, const Hyperparams& hp,
                                 uint64_t sweep_seed, ParamVector initial,
                                 const ExchangeFn& exchange);

}  // namespace deepspark
