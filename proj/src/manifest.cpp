#include "deepspark/manifest.hpp"

#include <ctime>
#include <fstream>

#include "deepspark/errors.hpp"

namespace deepspark {

namespace {

std::string format_now(const char* fmt) {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[64];
  std::strftime(buf, sizeof(buf), fmt, &tm);
  return buf;
}

}  // namespace

std::string timestamp_utc() { return format_now("%Y-%m-%dT%H:%M:%SZ"); }

std::string timestamp_compact() { return format_now("%Y%m%d-%H%M%S"); }

nlohmann::json make_manifest(const std::string& command, nlohmann::json config,
                             std::vector<std::string> artifacts) {
  nlohmann::json m;
  m["command"] = command;
  m["started_at"] = timestamp_utc();
  m["config"] = std::move(config);
  m["artifacts"] = std::move(artifacts);
  return m;
}

void write_manifest(const nlohmann::json& manifest, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << manifest.dump(2) << '\n';
  if (!out.flush()) throw IoError("write failed for " + path);
}

}  // namespace deepspark
