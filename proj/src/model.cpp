#include "deepspark/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "deepspark/errors.hpp"
#include "deepspark/rng.hpp"

namespace deepspark {

void gather_batch(const Dataset& ds, std::span<const uint32_t> idx, Minibatch& out) {
  out.n_features = ds.n_features;
  out.labels.resize(idx.size());
  out.features.resize(idx.size() * ds.n_features);
  for (size_t i = 0; i < idx.size(); ++i) {
    out.labels[i] = ds.labels[idx[i]];
    const auto row = ds.row(idx[i]);
    std::copy(row.begin(), row.end(), out.features.begin() + i * ds.n_features);
  }
}

Model Model::softmax(uint32_t n_features, uint32_t n_classes) {
  Model m;
  m.kind = ModelKind::SoftmaxRegression;
  m.n_features = n_features;
  m.n_classes = n_classes;
  m.validate();
  return m;
}

Model Model::mlp(uint32_t n_features, std::vector<uint32_t> hidden, uint32_t n_classes) {
  Model m;
  m.kind = ModelKind::Mlp;
  m.n_features = n_features;
  m.n_classes = n_classes;
  m.hidden = std::move(hidden);
  m.validate();
  return m;
}

void Model::validate() const {
  if (n_features == 0) throw ContractError("model: n_features must be positive");
  if (n_classes < 2) throw ContractError("model: n_classes must be at least 2");
  if (kind == ModelKind::SoftmaxRegression && !hidden.empty()) {
    throw ContractError("model: softmax regression has no hidden layers");
  }
  if (kind == ModelKind::Mlp && hidden.empty()) {
    throw ContractError("model: mlp needs at least one hidden layer");
  }
  for (uint32_t h : hidden) {
    if (h == 0) throw ContractError("model: hidden sizes must be positive");
  }
}

Model Model::parse(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ':')) parts.push_back(part);

  auto to_u32 = [&](const std::string& s) -> uint32_t {
    try {
      size_t pos = 0;
      const unsigned long v = std::stoul(s, &pos);
      if (pos != s.size() || v == 0 || v > UINT32_MAX) throw std::invalid_argument(s);
      return static_cast<uint32_t>(v);
    } catch (const std::exception&) {
      throw ContractError("model: bad integer '" + s + "' in '" + text + "'");
    }
  };

  if (parts.size() == 3 && parts[0] == "softmax") {
    return softmax(to_u32(parts[1]), to_u32(parts[2]));
  }
  if (parts.size() == 4 && parts[0] == "mlp") {
    std::vector<uint32_t> hidden;
    std::stringstream hs(parts[2]);
    std::string h;
    while (std::getline(hs, h, ',')) hidden.push_back(to_u32(h));
    if (hidden.empty()) throw ContractError("model: empty hidden list in '" + text + "'");
    return mlp(to_u32(parts[1]), std::move(hidden), to_u32(parts[3]));
  }
  throw ContractError("model: cannot parse '" + text +
                      "' (want softmax:<features>:<classes> or mlp:<features>:<h1,...>:<classes>)");
}

std::string Model::to_string() const {
  std::ostringstream os;
  if (kind == ModelKind::SoftmaxRegression) {
    os << "softmax:" << n_features << ":" << n_classes;
  } else {
    os << "mlp:" << n_features << ":";
    for (size_t i = 0; i < hidden.size(); ++i) {
      if (i) os << ",";
      os << hidden[i];
    }
    os << ":" << n_classes;
  }
  return os.str();
}

std::vector<Model::Layer> Model::layers() const {
  std::vector<Layer> out;
  size_t off = 0;
  uint32_t in_dim = n_features;
  auto push = [&](uint32_t out_dim) {
    Layer l;
    l.w_off = off;
    off += static_cast<size_t>(out_dim) * in_dim;
    l.b_off = off;
    off += out_dim;
    l.in_dim = in_dim;
    l.out_dim = out_dim;
    out.push_back(l);
    in_dim = out_dim;
  };
  for (uint32_t h : hidden) push(h);
  push(n_classes);
  return out;
}

size_t Model::param_dim() const {
  size_t dim = 0;
  for (const Layer& l : layers()) {
    dim += static_cast<size_t>(l.out_dim) * l.in_dim + l.out_dim;
  }
  return dim;
}

uint64_t Model::fingerprint() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  feed(kind == ModelKind::SoftmaxRegression ? 1 : 2, 1);
  feed(n_features, 4);
  feed(n_classes, 4);
  feed(hidden.size(), 4);
  for (uint32_t hd : hidden) feed(hd, 4);
  return h;
}

ParamVector init_params(const Model& model, uint64_t seed) {
  model.validate();
  Rng rng(mix_seed(seed, 0x1e17));
  ParamVector params(model.param_dim());
  for (const Model::Layer& l : model.layers()) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.in_dim));
    const size_t n = static_cast<size_t>(l.out_dim) * l.in_dim + l.out_dim;
    for (size_t i = 0; i < n; ++i) {
      params[l.w_off + i] = static_cast<float>(rng.uniform(-bound, bound));
    }
  }
  return params;
}

namespace {

void check_inputs(const Model& model, std::span<const float> params, const Minibatch& batch) {
  if (params.size() != model.param_dim()) {
    throw ContractError("loss_and_grad: params dim " + std::to_string(params.size()) +
                        " does not match model dim " + std::to_string(model.param_dim()));
  }
  if (batch.rows() == 0) throw ContractError("loss_and_grad: empty batch");
  if (batch.n_features != model.n_features) {
    throw ContractError("loss_and_grad: batch has " + std::to_string(batch.n_features) +
                        " features, model wants " + std::to_string(model.n_features));
  }
  if (batch.features.size() != batch.rows() * static_cast<size_t>(batch.n_features)) {
    throw ContractError("loss_and_grad: batch feature matrix shape mismatch");
  }
  for (uint32_t y : batch.labels) {
    if (y >= model.n_classes) {
      throw ContractError("loss_and_grad: label " + std::to_string(y) + " out of range");
    }
  }
}

// Forward/backward for one sample, f64 throughout. Activations per layer are
// kept for the backward pass. grad may be null for loss-only evaluation.
double sample_loss_grad(const std::vector<Model::Layer>& layers, std::span<const float> params,
                        std::span<const float> x, uint32_t label, double* grad) {
  const size_t n_layers = layers.size();

  std::vector<std::vector<double>> a(n_layers + 1);
  a[0].assign(x.begin(), x.end());
  for (size_t li = 0; li < n_layers; ++li) {
    const Model::Layer& l = layers[li];
    a[li + 1].assign(l.out_dim, 0.0);
    for (uint32_t o = 0; o < l.out_dim; ++o) {
      double z = params[l.b_off + o];
      const float* w = params.data() + l.w_off + static_cast<size_t>(o) * l.in_dim;
      for (uint32_t i = 0; i < l.in_dim; ++i) z += static_cast<double>(w[i]) * a[li][i];
      a[li + 1][o] = (li + 1 < n_layers) ? std::tanh(z) : z;
    }
  }

  // Softmax cross-entropy on the last layer's logits, max-shifted.
  std::vector<double>& logits = a[n_layers];
  const double zmax = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - zmax);
  const double lse = zmax + std::log(sum);
  const double loss = lse - logits[label];

  if (grad != nullptr) {
    // delta starts as softmax(z) - onehot(label) and walks backwards.
    std::vector<double> delta(logits.size());
    for (size_t c = 0; c < logits.size(); ++c) {
      delta[c] = std::exp(logits[c] - lse) - (c == label ? 1.0 : 0.0);
    }
    for (size_t li = n_layers; li-- > 0;) {
      const Model::Layer& l = layers[li];
      for (uint32_t o = 0; o < l.out_dim; ++o) {
        const double d = delta[o];
        grad[l.b_off + o] += d;
        double* gw = grad + l.w_off + static_cast<size_t>(o) * l.in_dim;
        for (uint32_t i = 0; i < l.in_dim; ++i) gw[i] += d * a[li][i];
      }
      if (li > 0) {
        std::vector<double> prev(l.in_dim, 0.0);
        for (uint32_t o = 0; o < l.out_dim; ++o) {
          const double d = delta[o];
          const float* w = params.data() + l.w_off + static_cast<size_t>(o) * l.in_dim;
          for (uint32_t i = 0; i < l.in_dim; ++i) prev[i] += d * static_cast<double>(w[i]);
        }
        // chain through tanh: a' = 1 - a^2
        for (uint32_t i = 0; i < l.in_dim; ++i) prev[i] *= 1.0 - a[li][i] * a[li][i];
        delta = std::move(prev);
      }
    }
  }
  return loss;
}

}  // namespace

double loss_and_grad(const Model& model, std::span<const float> params, const Minibatch& batch,
                     std::span<float> grad_out) {
  check_inputs(model, params, batch);
  if (grad_out.size() != params.size()) {
    throw ContractError("loss_and_grad: grad buffer dim mismatch");
  }
  const auto layers = model.layers();
  std::vector<double> grad_acc(params.size(), 0.0);
  double loss_sum = 0.0;
  for (size_t r = 0; r < batch.rows(); ++r) {
    loss_sum += sample_loss_grad(layers, params, batch.row(r), batch.labels[r], grad_acc.data());
  }
  const double inv_b = 1.0 / static_cast<double>(batch.rows());
  const double loss = loss_sum * inv_b;
  if (!std::isfinite(loss)) throw NumericError("loss_and_grad: non-finite loss");
  for (size_t i = 0; i < grad_acc.size(); ++i) {
    const double g = grad_acc[i] * inv_b;
    if (!std::isfinite(g)) throw NumericError("loss_and_grad: non-finite gradient");
    grad_out[i] = static_cast<float>(g);
  }
  return loss;
}

double loss_only(const Model& model, std::span<const float> params, const Minibatch& batch) {
  check_inputs(model, params, batch);
  const auto layers = model.layers();
  double loss_sum = 0.0;
  for (size_t r = 0; r < batch.rows(); ++r) {
    loss_sum += sample_loss_grad(layers, params, batch.row(r), batch.labels[r], nullptr);
  }
  const double loss = loss_sum / static_cast<double>(batch.rows());
  if (!std::isfinite(loss)) throw NumericError("loss_only: non-finite loss");
  return loss;
}

double grad_check(const Model& model, const ParamVector& params, const Minibatch& batch, double h) {
  if (!(h >= 1e-6 && h <= 1e-2)) throw ContractError("grad_check: h must lie in [1e-6, 1e-2]");
  ParamVector grad(params.size());
  const double base_loss = loss_and_grad(model, params, batch, grad);
  (void)base_loss;

  ParamVector probe = params;
  double max_rel = 0.0;
  for (size_t i = 0; i < params.size(); ++i) {
    const float orig = probe[i];
    const float xp = static_cast<float>(static_cast<double>(orig) + h);
    const float xm = static_cast<float>(static_cast<double>(orig) - h);
    probe[i] = xp;
    const double lp = loss_only(model, probe, batch);
    probe[i] = xm;
    const double lm = loss_only(model, probe, batch);
    probe[i] = orig;
    const double denom = static_cast<double>(xp) - static_cast<double>(xm);
    const double fd = (lp - lm) / denom;
    const double analytic = static_cast<double>(grad[i]);
    const double rel = std::abs(analytic - fd) / (std::abs(analytic) + std::abs(fd) + 1e-12);
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

uint32_t predict(const Model& model, std::span<const float> params, std::span<const float> row) {
  const auto layers = model.layers();
  std::vector<double> cur(row.begin(), row.end());
  for (size_t li = 0; li < layers.size(); ++li) {
    const Model::Layer& l = layers[li];
    std::vector<double> next(l.out_dim, 0.0);
    for (uint32_t o = 0; o < l.out_dim; ++o) {
      double z = params[l.b_off + o];
      const float* w = params.data() + l.w_off + static_cast<size_t>(o) * l.in_dim;
      for (uint32_t i = 0; i < l.in_dim; ++i) z += static_cast<double>(w[i]) * cur[i];
      next[o] = (li + 1 < layers.size()) ? std::tanh(z) : z;
    }
    cur = std::move(next);
  }
  return static_cast<uint32_t>(std::max_element(cur.begin(), cur.end()) - cur.begin());
}

double accuracy(const Model& model, std::span<const float> params, const Dataset& ds) {
  ds.validate();
  if (params.size() != model.param_dim()) throw ContractError("accuracy: params dim mismatch");
  size_t hits = 0;
  for (size_t i = 0; i < ds.size(); ++i) {
    if (predict(model, params, ds.row(i)) == ds.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ds.size());
}

}  // namespace deepspark
