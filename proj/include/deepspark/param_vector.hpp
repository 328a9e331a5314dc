#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace deepspark {

// Flat 32-bit parameter state. Master and worker sides share this layout, so
// vectors move across process boundaries without translation.
using ParamVector = std::vector<float>;

bool all_finite(std::span<const float> v);

// Throws ContractError naming `what` if any element is non-finite.
void require_finite(std::span<const float> v, const char* what);

// x - eta * grad, elementwise. Inputs are untouched; result must be finite.
ParamVector sgd_step(const ParamVector& x, const ParamVector& grad, double eta);

// Elastic update applied to one worker/master pair:
//   w' = w - alpha * (w - m)
//   m' = m + alpha * (w - m)
// Both sides move by the same single-rounded f32 elastic term, so the
// elementwise sum is conserved to within one rounding per side.
std::pair<ParamVector, ParamVector> easgd_update(const ParamVector& x_worker,
                                                 const ParamVector& x_master, double alpha);

// The per-element kernel shared by easgd_update and the exchanger service.
// Keeping one code path makes server-side replay bit-identical to the
// in-process update.
inline void elastic_update_elem(float w, float m, float alpha, float& w_out, float& m_out) {
  const float e = alpha * (w - m);
  w_out = w - e;
  m_out = m + e;
}

// Units-in-last-place distance between two finite f32 values.
inline uint64_t ulp_distance(float a, float b) {
  auto key = [](float x) -> int64_t {
    const int64_t bits = std::bit_cast<int32_t>(x);
    return bits < 0 ? static_cast<int64_t>(INT32_MIN) - bits : bits;
  };
  const int64_t ka = key(a), kb = key(b);
  return static_cast<uint64_t>(ka > kb ? ka - kb : kb - ka);
}

}  // namespace deepspark
