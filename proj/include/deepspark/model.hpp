#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "deepspark/dataset.hpp"
#include "deepspark/param_vector.hpp"

namespace deepspark {

enum class ModelKind { SoftmaxRegression, Mlp };

struct Minibatch {
  uint32_t n_features = 0;
  std::vector<float> features;  // rows * n_features, row-major
  std::vector<uint32_t> labels;

  size_t rows() const { return labels.size(); }
  std::span<const float> row(size_t i) const {
    return {features.data() + i * n_features, n_features};
  }
};

// Gather a batch from dataset rows by index. Reuses the batch's buffers.
void gather_batch(const Dataset& ds, std::span<const uint32_t> idx, Minibatch& out);

// Built-in differentiable classifiers: softmax regression, and an MLP with
// tanh hidden layers and a softmax output. Parameters flatten layer by layer,
// weights row-major then biases, so vectors are portable across processes.
struct Model {
  ModelKind kind = ModelKind::SoftmaxRegression;
  uint32_t n_features = 0;
  uint32_t n_classes = 0;
  std::vector<uint32_t> hidden;  // empty for softmax regression

  static Model softmax(uint32_t n_features, uint32_t n_classes);
  static Model mlp(uint32_t n_features, std::vector<uint32_t> hidden, uint32_t n_classes);

  // "softmax:<features>:<classes>" or "mlp:<features>:<h1,h2,...>:<classes>"
  static Model parse(const std::string& text);
  std::string to_string() const;

  size_t param_dim() const;
  uint64_t fingerprint() const;  // FNV-1a over the structural fields
  void validate() const;

  struct Layer {
    size_t w_off;  // weights, out_dim x in_dim row-major
    size_t b_off;  // biases, out_dim
    uint32_t in_dim;
    uint32_t out_dim;
  };
  std::vector<Layer> layers() const;
};

// Seeded uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer.
ParamVector init_params(const Model& model, uint64_t seed);

// Mean cross-entropy over the batch; grad_out receives d(loss)/d(params).
// Internals run in f64; the gradient is rounded to f32 on output.
double loss_and_grad(const Model& model, std::span<const float> params, const Minibatch& batch,
                     std::span<float> grad_out);

double loss_only(const Model& model, std::span<const float> params, const Minibatch& batch);

// Max over coordinates of |analytic - central difference| / (|a| + |c| + 1e-12),
// with h in [1e-6, 1e-2]. The test oracle for gradient correctness.
double grad_check(const Model& model, const ParamVector& params, const Minibatch& batch, double h);

uint32_t predict(const Model& model, std::span<const float> params, std::span<const float> row);

double accuracy(const Model& model, std::span<const float> params, const Dataset& ds);

}  // namespace deepspark
