#include "deepspark/speedup.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "deepspark/errors.hpp"

namespace deepspark {

void SpeedupInputs::validate() const {
  if (N_a < 1) throw ContractError("speedup: N_a must be positive");
  if (!(C > 0.0)) throw ContractError("speedup: C must be positive");
  if (!(S >= 0.0)) throw ContractError("speedup: S must be nonnegative");
  if (n < 1) throw ContractError("speedup: n must be positive");
  if (tau < 1) throw ContractError("speedup: tau must be positive");
  if (!(d >= 1.0)) throw ContractError("speedup: d must be >= 1");
  if (!(a > 0.0 && a < 1.0)) throw ContractError("speedup: target accuracy must be in (0,1)");
}

Times times(const SpeedupInputs& inp) {
  inp.validate();
  Times t;
  const double N = static_cast<double>(inp.N_a);
  t.t_comp = N * inp.C * inp.d / inp.n;
  t.t_comm = inp.n * inp.d * N * inp.S / inp.tau;
  return t;
}

double speedup(const SpeedupInputs& inp) {
  inp.validate();
  const double n = inp.n;
  const double tau = inp.tau;
  return n * tau / (tau * inp.d + (inp.d * inp.S / inp.C) * n * n);
}

double speedup_large_tau(uint32_t n, double d) {
  if (n < 1) throw ContractError("speedup: n must be positive");
  if (!(d >= 1.0)) throw ContractError("speedup: d must be >= 1");
  return static_cast<double>(n) / d;
}

namespace {

uint64_t as_whole(double v, const char* field) {
  if (!(v >= 1.0) || v != std::floor(v)) {
    throw ContractError(std::string("sweep: ") + field + " requires a whole value >= 1");
  }
  return static_cast<uint64_t>(v);
}

}  // namespace

std::vector<SweepRow> sweep(const SpeedupInputs& base, const std::string& vary,
                            const std::vector<double>& values) {
  base.validate();
  std::vector<SweepRow> rows;
  rows.reserve(values.size());
  for (double v : values) {
    SpeedupInputs inp = base;
    if (vary == "n") {
      inp.n = static_cast<uint32_t>(as_whole(v, "n"));
    } else if (vary == "tau") {
      inp.tau = static_cast<uint32_t>(as_whole(v, "tau"));
    } else if (vary == "d") {
      inp.d = v;
    } else if (vary == "S") {
      inp.S = v;
    } else if (vary == "C") {
      inp.C = v;
    } else if (vary == "N_a") {
      inp.N_a = as_whole(v, "N_a");
    } else {
      throw ContractError("sweep: unknown field '" + vary + "' (n, tau, d, S, C, N_a)");
    }
    const Times t = times(inp);
    rows.push_back({v, t.t_comp, t.t_comm, speedup(inp)});
  }
  return rows;
}

std::string format_sig6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& vary,
                     const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "vary,value,t_comp,t_comm,speedup\n";
  for (const SweepRow& r : rows) {
    out << vary << ',' << format_sig6(r.value) << ',' << format_sig6(r.t_comp) << ','
        << format_sig6(r.t_comm) << ',' << format_sig6(r.speedup) << '\n';
  }
  if (!out.flush()) throw IoError("write failed for " + path);
}

}  // namespace deepspark
