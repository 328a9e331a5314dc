#pragma once

#include <cstdint>
#include <limits>

namespace deepspark {

enum class PeriodMode { Fixed, Adaptive };

struct Hyperparams {
  double eta = 0.05;        // learning rate
  double alpha = 0.1;       // moving rate, must stay inside (0,1)
  uint32_t tau = 100;       // communication period (Fixed mode)
  uint32_t batch_size = 32;
  uint64_t i_max = 1000;
  double loss_cut = 0.0;    // cumulated-loss threshold (Adaptive mode)
  double weight_decay = 0.0;  // optional L2 term; 0 disables it
  PeriodMode period_mode = PeriodMode::Fixed;

  void validate() const;
};

}  // namespace deepspark
