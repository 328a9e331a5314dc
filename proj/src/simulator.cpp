#include "deepspark/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <tuple>

#include "deepspark/errors.hpp"
#include "deepspark/log.hpp"
#include "deepspark/rng.hpp"
#include "deepspark/worker.hpp"

namespace deepspark {

namespace {
constexpr uint64_t kSweepTag = 0x53574550;   // "SWEP"
constexpr uint64_t kPartTag = 0x50415254;    // "PART"
constexpr uint64_t kHoldTag = 0x484f4c44;    // "HOLD"
}  // namespace

uint64_t sim_sweep_seed(const SimConfig& cfg, uint32_t worker) {
  return mix_seed(mix_seed(cfg.data_seed, kSweepTag), cfg.replicate_shards ? 0 : worker);
}

uint64_t sim_partition_seed(const SimConfig& cfg) { return mix_seed(cfg.data_seed, kPartTag); }

uint64_t sim_holdout_seed(const SimConfig& cfg) { return mix_seed(cfg.data_seed, kHoldTag); }

void SimConfig::validate() const {
  if (n_workers < 1) throw ContractError("sim: n_workers must be >= 1");
  if (!(batch_cost_C > 0.0)) throw ContractError("sim: batch_cost_C must be positive");
  if (!(comm_cost_S >= 0.0)) throw ContractError("sim: comm_cost_S must be nonnegative");
  if (eval_every < 1) throw ContractError("sim: eval_every must be >= 1");
  if (!(holdout_frac > 0.0 && holdout_frac < 1.0)) {
    throw ContractError("sim: holdout_frac must be in (0,1)");
  }
  if (!cost_multipliers.empty()) {
    if (cost_multipliers.size() != n_workers) {
      throw ContractError("sim: cost_multipliers must have one entry per worker");
    }
    for (double m : cost_multipliers) {
      if (!(m > 0.0)) throw ContractError("sim: cost multipliers must be positive");
    }
  }
  model.validate();
  dataset.validate();
  if (dataset.n_features != model.n_features || dataset.n_classes > model.n_classes) {
    throw ContractError("sim: dataset dimensions do not fit the model");
  }
}

namespace {

struct Ev {
  double t;
  uint64_t tie;
  uint32_t worker;
};

struct EvLater {
  bool operator()(const Ev& a, const Ev& b) const {
    return std::tie(a.t, a.tie, a.worker) > std::tie(b.t, b.tie, b.worker);
  }
};

double worker_mult(const SimConfig& cfg, uint32_t k) {
  return cfg.cost_multipliers.empty() ? 1.0 : cfg.cost_multipliers[k];
}

SimResult simulate_async(const SimConfig& cfg, const std::vector<const Dataset*>& shards,
                         const Dataset& holdout, ParamVector master) {
  const uint32_t n = cfg.n_workers;
  const float alpha_f = static_cast<float>(cfg.hyper.alpha);

  std::vector<SgdEngine> engines;
  std::vector<ExchangePolicy> policies;
  engines.reserve(n);
  policies.reserve(n);
  SimResult res;
  res.n_workers = n;
  res.worker_logs.resize(n);
  for (uint32_t k = 0; k < n; ++k) {
    const Hyperparams hp =
        resolve_loss_cut(cfg.hyper, cfg.model, *shards[k], sim_sweep_seed(cfg, k), master);
    hp.validate();
    engines.emplace_back(cfg.model, *shards[k], hp, sim_sweep_seed(cfg, k), master);
    policies.emplace_back(hp);
    res.worker_logs[k].reserve(hp.i_max);
  }

  Rng sched(cfg.schedule_seed);
  std::priority_queue<Ev, std::vector<Ev>, EvLater> pq;
  std::vector<uint64_t> done(n, 0);
  for (uint32_t k = 0; k < n; ++k) {
    pq.push({cfg.batch_cost_C * worker_mult(cfg, k), sched.next_u64(), k});
  }

  auto eval_at = [&](double t, uint64_t iter) {
    res.eval_curve.push_back({t, iter, accuracy(cfg.model, master, holdout)});
  };
  eval_at(0.0, 0);
  uint64_t next_eval = cfg.eval_every;

  double total = 0.0;
  while (!pq.empty()) {
    const Ev ev = pq.top();
    pq.pop();
    const uint32_t k = ev.worker;
    const double loss = engines[k].step();
    ++done[k];
    const auto dec = policies[k].on_iteration(loss);

    double next_t = ev.t + cfg.batch_cost_C * worker_mult(cfg, k);
    if (dec.exchange) {
      ParamVector w = engines[k].params();
      for (size_t i = 0; i < w.size(); ++i) {
        elastic_update_elem(w[i], master[i], alpha_f, w[i], master[i]);
      }
      engines[k].set_params(std::move(w));
      if (cfg.record_master_snaps) res.master_snaps.push_back({ev.t, k, master});
      next_t += cfg.comm_cost_S;
      total = std::max(total, ev.t + cfg.comm_cost_S);
    } else {
      total = std::max(total, ev.t);
    }

    TrainRecord rec;
    rec.iter = done[k];
    rec.wall_ms = std::llround(ev.t);
    rec.batch_loss = loss;
    rec.cumulated_loss = policies[k].cumulated();
    rec.exchanged = dec.exchange;
    rec.period_len = dec.exchange ? dec.period_len : 0;
    res.worker_logs[k].push_back(rec);

    if (done[k] < cfg.hyper.i_max) pq.push({next_t, sched.next_u64(), k});

    const uint64_t min_iter = *std::min_element(done.begin(), done.end());
    while (next_eval <= min_iter) {
      eval_at(ev.t, next_eval);
      next_eval += cfg.eval_every;
    }
  }
  if (res.eval_curve.back().per_worker_iter != cfg.hyper.i_max) {
    eval_at(total, cfg.hyper.i_max);
  }

  res.worker_final_params.reserve(n);
  for (uint32_t k = 0; k < n; ++k) res.worker_final_params.push_back(engines[k].params());
  res.final_master = std::move(master);
  res.virtual_clock_total = total;
  res.iterations_per_worker = cfg.hyper.i_max;
  return res;
}

SimResult simulate_sync(const SimConfig& cfg, const std::vector<const Dataset*>& shards,
                        const Dataset& holdout, ParamVector master) {
  const uint32_t n = cfg.n_workers;
  const size_t dim = master.size();
  const float wd = static_cast<float>(cfg.hyper.weight_decay);

  std::vector<ShardSweeper> sweepers;
  sweepers.reserve(n);
  for (uint32_t k = 0; k < n; ++k) {
    sweepers.emplace_back(*shards[k], cfg.hyper.batch_size, sim_sweep_seed(cfg, k));
  }

  SimResult res;
  res.n_workers = n;
  res.worker_logs.resize(n);
  for (auto& log : res.worker_logs) log.reserve(cfg.hyper.i_max);

  double round_cost = 0.0;
  for (uint32_t k = 0; k < n; ++k) {
    round_cost = std::max(round_cost, cfg.batch_cost_C * worker_mult(cfg, k));
  }
  round_cost += cfg.comm_cost_S;

  auto eval_at = [&](double t, uint64_t iter) {
    res.eval_curve.push_back({t, iter, accuracy(cfg.model, master, holdout)});
  };
  eval_at(0.0, 0);
  uint64_t next_eval = cfg.eval_every;

  Minibatch batch;
  std::vector<double> gsum(dim);
  ParamVector gk(dim), gavg(dim);
  double t = 0.0;
  for (uint64_t r = 1; r <= cfg.hyper.i_max; ++r) {
    std::fill(gsum.begin(), gsum.end(), 0.0);
    t += round_cost;
    for (uint32_t k = 0; k < n; ++k) {
      sweepers[k].next(batch);
      const double loss = loss_and_grad(cfg.model, master, batch, gk);
      for (size_t i = 0; i < dim; ++i) gsum[i] += gk[i];
      TrainRecord rec;
      rec.iter = r;
      rec.wall_ms = std::llround(t);
      rec.batch_loss = loss;
      rec.cumulated_loss = 0.0;
      rec.exchanged = true;  // every round ends in a synchronized averaging
      rec.period_len = 1;
      res.worker_logs[k].push_back(rec);
    }
    for (size_t i = 0; i < dim; ++i) {
      gavg[i] = static_cast<float>(gsum[i] / n);
      if (wd > 0.0f) gavg[i] += wd * master[i];
    }
    master = sgd_step(master, gavg, cfg.hyper.eta);
    if (cfg.record_master_snaps) res.master_snaps.push_back({t, 0, master});
    while (next_eval <= r) {
      eval_at(t, next_eval);
      next_eval += cfg.eval_every;
    }
  }
  if (res.eval_curve.back().per_worker_iter != cfg.hyper.i_max) eval_at(t, cfg.hyper.i_max);

  res.worker_final_params.assign(n, master);
  res.final_master = std::move(master);
  res.virtual_clock_total = t;
  res.iterations_per_worker = cfg.hyper.i_max;
  return res;
}

}  // namespace

SimResult simulate(const SimConfig& cfg) {
  cfg.validate();
  auto [train, holdout] = split_holdout(cfg.dataset, cfg.holdout_frac, sim_holdout_seed(cfg));

  std::vector<Dataset> owned;
  std::vector<const Dataset*> shards(cfg.n_workers);
  if (cfg.replicate_shards) {
    for (uint32_t k = 0; k < cfg.n_workers; ++k) shards[k] = &train;
  } else {
    owned = partition(train, cfg.n_workers, sim_partition_seed(cfg));
    for (uint32_t k = 0; k < cfg.n_workers; ++k) shards[k] = &owned[k];
  }

  ParamVector master = init_params(cfg.model, cfg.init_seed);
  DS_LOG_INFO << "simulate: mode=" << (cfg.mode == SimMode::AsyncEASGD ? "async" : "sync")
              << " n=" << cfg.n_workers << " i_max=" << cfg.hyper.i_max
              << " train=" << train.size() << " holdout=" << holdout.size();
  SimResult res = (cfg.mode == SimMode::AsyncEASGD)
                      ? simulate_async(cfg, shards, holdout, std::move(master))
                      : simulate_sync(cfg, shards, holdout, std::move(master));
  DS_LOG_INFO << "simulate: virtual time " << res.virtual_clock_total << ", final accuracy "
              << res.eval_curve.back().accuracy;
  return res;
}

std::optional<uint64_t> iterations_to_accuracy(const SimResult& result, double target) {
  for (const EvalPoint& p : result.eval_curve) {
    if (p.accuracy >= target) return p.per_worker_iter;
  }
  return std::nullopt;
}

double estimate_d(const SimResult& async_result, uint64_t baseline_N, double target) {
  if (baseline_N == 0) throw ContractError("estimate_d: baseline_N must be positive");
  const auto iters = iterations_to_accuracy(async_result, target);
  if (!iters) throw ContractError("estimate_d: run never reached the target accuracy");
  return static_cast<double>(async_result.n_workers) * static_cast<double>(*iters) /
         static_cast<double>(baseline_N);
}

}  // namespace deepspark
