#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "deepspark/errors.hpp"
#include "deepspark/rng.hpp"
#include "deepspark/speedup.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace deepspark;

namespace {

SpeedupInputs inputs(uint64_t n_a, double c, double s, uint32_t n, uint32_t tau, double d) {
  SpeedupInputs inp;
  inp.N_a = n_a;
  inp.C = c;
  inp.S = s;
  inp.n = n;
  inp.tau = tau;
  inp.d = d;
  return inp;
}

SpeedupInputs random_inputs(Rng& rng) {
  return inputs(1 + rng.below(1000000), rng.uniform(1e-3, 1e3), rng.uniform(0.0, 1e3),
                static_cast<uint32_t>(1 + rng.below(1024)),
                static_cast<uint32_t>(1 + rng.below(100000)), 1.0 + rng.uniform(0.0, 50.0));
}

}  // namespace

TEST_SUITE("speedup") {

TEST_CASE("component times: worked examples") {
  const Times a = times(inputs(1000, 1.0, 0.0, 4, 100, 1.0));
  CHECK(a.t_comp == 250.0);
  CHECK(a.t_comm == 0.0);

  const Times b = times(inputs(1000, 1.0, 1.0, 1, 1, 1.0));
  CHECK(b.t_comp == 1000.0);
  CHECK(b.t_comm == 1000.0);
}

TEST_CASE("speedup: worked examples") {
  // No communication cost and no asynchrony penalty: ideal linear scaling.
  for (uint32_t n : {1u, 2u, 7u, 64u}) {
    CHECK(speedup(inputs(1000, 2.0, 0.0, n, 10, 1.0)) == static_cast<double>(n));
  }
  // Synchronous commodity cluster: slower than a single machine.
  CHECK(speedup(inputs(1000, 1.0, 10.0, 4, 1, 1.0)) == doctest::Approx(4.0 / 161.0).epsilon(1e-12));
  // Mixed case.
  CHECK(speedup(inputs(1000, 1.0, 1.0, 4, 100, 2.0)) ==
        doctest::Approx(400.0 / 232.0).epsilon(1e-12));
}

TEST_CASE("speedup is consistent with its own time components") {
  Rng rng(606);
  for (int i = 0; i < 10000; ++i) {
    const SpeedupInputs inp = random_inputs(rng);
    const Times t = times(inp);
    const double direct = speedup(inp);
    const double from_times =
        static_cast<double>(inp.N_a) * inp.C / (t.t_comp + t.t_comm);
    CHECK(std::fabs(direct - from_times) <= 1e-12 * std::fabs(from_times));
  }
}

TEST_CASE("large-tau limit") {
  CHECK(speedup_large_tau(16, 9.64) == doctest::Approx(1.6598).epsilon(1e-3));
  CHECK(speedup_large_tau(8, 1.0) == 8.0);

  // Convergence: pushing tau up drives the full formula onto the limit.
  const double limit = speedup_large_tau(16, 2.0);
  SpeedupInputs inp = inputs(1000, 1.0, 5.0, 16, 1, 2.0);
  double prev_err = 1e300;
  for (uint32_t tau : {10u, 100u, 10000u, 10000000u}) {
    inp.tau = tau;
    const double err = std::fabs(speedup(inp) - limit) / limit;
    CHECK(err < prev_err);
    prev_err = err;
  }
  CHECK(prev_err < 1e-3);
}

TEST_CASE("validation rejects out-of-domain inputs") {
  CHECK_NOTHROW(inputs(1, 1.0, 0.0, 1, 1, 1.0).validate());
  SpeedupInputs bad = inputs(0, 1.0, 0.0, 1, 1, 1.0);
  CHECK_THROWS_AS(bad.validate(), ContractError);
  bad = inputs(10, 0.0, 0.0, 1, 1, 1.0);
  CHECK_THROWS_AS(bad.validate(), ContractError);
  bad = inputs(10, 1.0, -1.0, 1, 1, 1.0);
  CHECK_THROWS_AS(bad.validate(), ContractError);
  bad = inputs(10, 1.0, 0.0, 0, 1, 1.0);
  CHECK_THROWS_AS(bad.validate(), ContractError);
  bad = inputs(10, 1.0, 0.0, 1, 0, 1.0);
  CHECK_THROWS_AS(bad.validate(), ContractError);
  bad = inputs(10, 1.0, 0.0, 1, 1, 0.5);
  CHECK_THROWS_AS(bad.validate(), ContractError);
  bad = inputs(10, 1.0, 0.0, 1, 1, 1.0);
  bad.a = 1.0;
  CHECK_THROWS_AS(bad.validate(), ContractError);
}

TEST_CASE("sweep: single value reproduces the point evaluation") {
  const SpeedupInputs base = inputs(1000, 1.0, 0.5, 4, 50, 1.5);
  const auto rows = sweep(base, "n", {1.0});
  REQUIRE(rows.size() == 1);
  SpeedupInputs point = base;
  point.n = 1;
  CHECK(rows[0].value == 1.0);
  CHECK(rows[0].speedup == speedup(point));
  const Times t = times(point);
  CHECK(rows[0].t_comp == t.t_comp);
  CHECK(rows[0].t_comm == t.t_comm);
}

TEST_CASE("sweep: speedup strictly increases in tau") {
  const SpeedupInputs base = inputs(1000, 1.0, 2.0, 8, 1, 1.5);
  std::vector<double> taus;
  for (int k = 1; k <= 12; ++k) taus.push_back(k * 25.0);
  const auto rows = sweep(base, "tau", taus);
  REQUIRE(rows.size() == taus.size());
  for (size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].speedup > rows[i - 1].speedup);
}

TEST_CASE("sweep over n: synchronous costs sink every cluster size") {
  // tau=1, d=1, S/C=10: communication swamps compute for any n, and adding
  // nodes only makes it worse.
  const SpeedupInputs base = inputs(1000, 1.0, 10.0, 1, 1, 1.0);
  std::vector<double> ns;
  for (int n = 1; n <= 32; ++n) ns.push_back(n);
  const auto rows = sweep(base, "n", ns);
  for (size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].speedup < 1.0);
    if (i > 0) CHECK(rows[i].speedup < rows[i - 1].speedup);
  }
  CHECK(rows.back().speedup < 0.01);
}

TEST_CASE("sweep over n: cheap communication shows an interior optimum") {
  // S/C small enough moves the optimum inside the swept range; beyond it the
  // n^2 communication term wins and speedup decays monotonically.
  const SpeedupInputs base = inputs(1000, 1.0, 0.001, 1, 1, 1.0);
  std::vector<double> ns;
  for (int n = 1; n <= 64; ++n) ns.push_back(n);
  const auto rows = sweep(base, "n", ns);
  size_t best = 0;
  for (size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].speedup > rows[best].speedup) best = i;
  }
  CHECK(best > 0);
  CHECK(best + 1 < rows.size());
  for (size_t i = best + 1; i < rows.size(); ++i) CHECK(rows[i].speedup < rows[i - 1].speedup);
}

TEST_CASE("sweep: integer fields require whole values; unknown fields rejected") {
  const SpeedupInputs base = inputs(1000, 1.0, 0.0, 4, 100, 1.0);
  CHECK_THROWS_AS(sweep(base, "n", {2.5}), ContractError);
  CHECK_THROWS_AS(sweep(base, "tau", {0.0}), ContractError);
  CHECK_THROWS_AS(sweep(base, "bogus", {1.0}), ContractError);
  CHECK_NOTHROW(sweep(base, "S", {0.25}));
  CHECK_NOTHROW(sweep(base, "C", {0.25}));
  CHECK_NOTHROW(sweep(base, "d", {1.25}));
  CHECK_NOTHROW(sweep(base, "N_a", {500.0}));
}

TEST_CASE("sweep csv: exact bytes for exact numbers") {
  testutil::TempDir tmp;
  const SpeedupInputs base = inputs(1000, 1.0, 0.0, 2, 10, 1.0);
  const auto rows = sweep(base, "n", {2.0, 4.0});
  const std::string path = tmp.file("sweep.csv");
  write_sweep_csv(rows, "n", path);
  std::ifstream in(path, std::ios::binary);
  const std::string got((std::istreambuf_iterator<char>(in)), {});
  CHECK(got ==
        "vary,value,t_comp,t_comm,speedup\n"
        "n,2,500,0,2\n"
        "n,4,250,0,4\n");
}

TEST_CASE("six-significant-digit formatting") {
  CHECK(format_sig6(0.0) == "0");
  CHECK(format_sig6(2.0) == "2");
  CHECK(format_sig6(250.0) == "250");
  CHECK(format_sig6(4.0 / 161.0) == "0.0248447");
  CHECK(format_sig6(1.0 / 3.0) == "0.333333");
}

}  // TEST_SUITE
