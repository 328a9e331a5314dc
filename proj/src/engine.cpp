#include "deepspark/engine.hpp"

#include <chrono>
#include <numeric>

#include "deepspark/errors.hpp"

namespace deepspark {

ShardSweeper::ShardSweeper(const Dataset& shard, uint32_t batch_size, uint64_t seed)
    : shard_(&shard), batch_size_(batch_size), seed_(seed) {
  shard.validate();
  if (batch_size_ == 0) throw ContractError("sweeper: batch_size must be positive");
  order_.resize(shard.size());
  std::iota(order_.begin(), order_.end(), 0u);
  reshuffle();
}

void ShardSweeper::reshuffle() {
  Rng rng(mix_seed(seed_, epoch_));
  rng.shuffle(order_);
  pos_ = 0;
}

void ShardSweeper::next(Minibatch& out) {
  if (pos_ >= order_.size()) {
    ++epoch_;
    reshuffle();
  }
  const size_t take = std::min<size_t>(batch_size_, order_.size() - pos_);
  gather_batch(*shard_, {order_.data() + pos_, take}, out);
  pos_ += take;
}

ExchangePolicy::Decision ExchangePolicy::on_iteration(double batch_loss) {
  cumulated_ += batch_loss;
  ++since_exchange_;
  const bool fire = (mode_ == PeriodMode::Fixed) ? since_exchange_ == tau_
                                                 : should_exchange(cumulated_, loss_cut_);
  Decision d;
  if (fire) {
    d.exchange = true;
    d.period_len = since_exchange_;
    cumulated_ = 0.0;
    since_exchange_ = 0;
  }
  return d;
}

SgdEngine::SgdEngine(Model model, const Dataset& shard, const Hyperparams& hp, uint64_t sweep_seed,
                     ParamVector initial)
    : model_(std::move(model)),
      shard_(&shard),
      hp_(hp),
      sweeper_(shard, hp.batch_size, sweep_seed),
      params_(std::move(initial)),
      grad_(model_.param_dim(), 0.0f) {
  hp_.validate();
  if (params_.size() != model_.param_dim()) {
    throw ContractError("engine: initial params dim does not match model");
  }
  if (shard.n_features != model_.n_features || shard.n_classes > model_.n_classes) {
    throw ContractError("engine: shard dims do not match model");
  }
}

void SgdEngine::set_params(ParamVector p) {
  if (p.size() != params_.size()) throw ContractError("engine: params dim change");
  params_ = std::move(p);
}

double SgdEngine::step() {
  sweeper_.next(batch_);
  const double loss = loss_and_grad(model_, params_, batch_, grad_);
  if (hp_.weight_decay > 0.0) {
    const float wd = static_cast<float>(hp_.weight_decay);
    for (size_t i = 0; i < grad_.size(); ++i) grad_[i] += wd * params_[i];
  }
  params_ = sgd_step(params_, grad_, hp_.eta);
  ++iter_;
  return loss;
}

LocalRunResult run_training_loop(const Model& model, const Dataset& shard, const Hyperparams& hp,
                                 uint64_t sweep_seed, ParamVector initial,
                                 const ExchangeFn& exchange) {
  hp.validate();
  SgdEngine engine(model, shard, hp, sweep_seed, std::move(initial));
  ExchangePolicy policy(hp);

  LocalRunResult out;
  out.log.reserve(hp.i_max);
  const auto start = std::chrono::steady_clock::now();
  for (uint64_t i = 1; i <= hp.i_max; ++i) {
    const double loss = engine.step();
    const auto decision = policy.on_iteration(loss);
    if (decision.exchange && exchange) {
      engine.set_params(exchange(engine.params()));
    }
    TrainRecord rec;
    rec.iter = i;
    rec.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - start)
                      .count();
    rec.batch_loss = loss;
    rec.cumulated_loss = policy.cumulated();
    rec.exchanged = decision.exchange;
    rec.period_len = decision.exchange ? decision.period_len : 0;
    out.log.push_back(rec);
  }
  out.final_params = engine.params();
  return out;
}

}  // namespace deepspark
