#include "deepspark/hyperparams.hpp"

#include "deepspark/errors.hpp"

namespace deepspark {

void Hyperparams::validate() const {
  if (!(eta > 0.0)) throw ContractError("hyperparams: eta must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ContractError("hyperparams: alpha must lie in (0,1)");
  if (batch_size == 0) throw ContractError("hyperparams: batch_size must be positive");
  if (i_max == 0) throw ContractError("hyperparams: i_max must be positive");
  if (weight_decay < 0.0) throw ContractError("hyperparams: weight_decay must be nonnegative");
  if (period_mode == PeriodMode::Fixed) {
    if (tau == 0) throw ContractError("hyperparams: tau must be positive in Fixed mode");
  } else {
    if (!(loss_cut > 0.0)) throw ContractError("hyperparams: loss_cut must be positive in Adaptive mode");
  }
}

}  // namespace deepspark
