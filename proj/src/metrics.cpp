#include "deepspark/metrics.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "deepspark/errors.hpp"

namespace deepspark {

bool same_trajectory(const TrainLog& a, const TrainLog& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (!a[i].same_trajectory(b[i])) return false;
  }
  return true;
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_train_log(const TrainLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "iter,wall_ms,batch_loss,cumulated_loss,exchanged,period_len\n";
  for (const TrainRecord& r : log) {
    out << r.iter << ',' << r.wall_ms << ',' << format_double(r.batch_loss) << ','
        << format_double(r.cumulated_loss) << ',' << (r.exchanged ? 1 : 0) << ',' << r.period_len
        << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

TrainLog read_train_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  TrainLog log;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) continue;  // header
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) throw ParseError(line_no, "expected 6 columns in train log");
    TrainRecord r;
    try {
      r.iter = std::stoull(cells[0]);
      r.wall_ms = std::stoll(cells[1]);
      r.batch_loss = std::stod(cells[2]);
      r.cumulated_loss = std::stod(cells[3]);
      r.exchanged = cells[4] == "1";
      r.period_len = static_cast<uint32_t>(std::stoul(cells[5]));
    } catch (const std::exception&) {
      throw ParseError(line_no, "bad cell in train log");
    }
    log.push_back(r);
  }
  return log;
}

}  // namespace deepspark
