#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace deepspark {

// Closed-form cost model for n asynchronous workers exchanging every tau
// iterations. N_a is the single-worker iteration count to the target
// accuracy, C the per-batch compute time, S the per-exchange communication
// overhead, and d >= 1 the discrepancy penalty asynchrony inflicts on the
// total iteration count.
struct SpeedupInputs {
  uint64_t N_a = 1000;
  double C = 1.0;
  double S = 0.0;
  uint32_t n = 1;
  uint32_t tau = 1;
  double d = 1.0;
  double a = 0.5;  // target accuracy the other numbers refer to; metadata

  void validate() const;
};

struct Times {
  double t_comp = 0.0;
  double t_comm = 0.0;
};

// T_comp = N_a*C*d/n,  T_comm = n*d*N_a*S/tau.
Times times(const SpeedupInputs& inp);

// n*tau / (tau*d + (d*S/C)*n^2); algebraically N_a*C / (T_comp + T_comm).
double speedup(const SpeedupInputs& inp);

// The tau -> infinity limit: n/d.
double speedup_large_tau(uint32_t n, double d);

struct SweepRow {
  double value = 0.0;
  double t_comp = 0.0;
  double t_comm = 0.0;
  double speedup = 0.0;
};

// Re-evaluates the model with one field swept over `values`; vary is one of
// n, tau, d, S, C, N_a (integer fields require whole-number values).
std::vector<SweepRow> sweep(const SpeedupInputs& base, const std::string& vary,
                            const std::vector<double>& values);

// CSV `vary,value,t_comp,t_comm,speedup`, numbers at 6 significant digits.
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& vary,
                     const std::string& path);

std::string format_sig6(double v);

}  // namespace deepspark
