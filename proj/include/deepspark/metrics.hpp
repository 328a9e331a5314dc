#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace deepspark {

// One row of the per-worker training log. cumulated_loss is the running L of
// the adaptive heuristic; it reads 0 on rows where an exchange just reset it.
struct TrainRecord {
  uint64_t iter = 0;      // 1-based
  int64_t wall_ms = 0;    // elapsed ms (real workers) or virtual time (simulator)
  double batch_loss = 0.0;
  double cumulated_loss = 0.0;
  bool exchanged = false;
  uint32_t period_len = 0;  // iterations since previous exchange; 0 on non-exchange rows

  // Equality over the deterministic fields; wall clock is measurement, not state.
  bool same_trajectory(const TrainRecord& o) const {
    return iter == o.iter && batch_loss == o.batch_loss && cumulated_loss == o.cumulated_loss &&
           exchanged == o.exchanged && period_len == o.period_len;
  }
};

using TrainLog = std::vector<TrainRecord>;

bool same_trajectory(const TrainLog& a, const TrainLog& b);

// CSV schema: iter,wall_ms,batch_loss,cumulated_loss,exchanged,period_len
// Doubles are written with shortest round-trip formatting so identical logs
// serialize to identical bytes.
void write_train_log(const TrainLog& log, const std::string& path);
TrainLog read_train_log(const std::string& path);

std::string format_double(double v);

}  // namespace deepspark
