#include "deepspark/param_vector.hpp"

#include <cmath>
#include <string>

#include "deepspark/errors.hpp"

namespace deepspark {

bool all_finite(std::span<const float> v) {
  for (float x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void require_finite(std::span<const float> v, const char* what) {
  if (!all_finite(v)) throw ContractError(std::string(what) + " contains a non-finite value");
}

ParamVector sgd_step(const ParamVector& x, const ParamVector& grad, double eta) {
  if (x.size() != grad.size()) {
    throw ContractError("sgd_step: dim mismatch (" + std::to_string(x.size()) + " vs " +
                        std::to_string(grad.size()) + ")");
  }
  if (!(eta > 0.0)) throw ContractError("sgd_step: eta must be positive");
  require_finite(x, "sgd_step: x");
  require_finite(grad, "sgd_step: grad");

  const float eta_f = static_cast<float>(eta);
  ParamVector out(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    out[i] = x[i] - eta_f * grad[i];
    if (!std::isfinite(out[i])) {
      throw NumericError("sgd_step: non-finite result at index " + std::to_string(i));
    }
  }
  return out;
}

std::pair<ParamVector, ParamVector> easgd_update(const ParamVector& x_worker,
                                                 const ParamVector& x_master, double alpha) {
  if (x_worker.size() != x_master.size()) {
    throw ContractError("easgd_update: dim mismatch (" + std::to_string(x_worker.size()) +
                        " vs " + std::to_string(x_master.size()) + ")");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ContractError("easgd_update: alpha must lie in (0,1)");
  }
  const float alpha_f = static_cast<float>(alpha);
  ParamVector w(x_worker.size());
  ParamVector m(x_master.size());
  for (size_t i = 0; i < x_worker.size(); ++i) {
    elastic_update_elem(x_worker[i], x_master[i], alpha_f, w[i], m[i]);
  }
  return {std::move(w), std::move(m)};
}

}  // namespace deepspark
