#include "deepspark/log.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <mutex>

namespace deepspark::logging {

namespace {

LogLevel parse_env() {
  const char* env = std::getenv("DEEPSPARK_LOG");
  if (env == nullptr) return LogLevel::Info;
  if (std::strcmp(env, "error") == 0) return LogLevel::Error;
  if (std::strcmp(env, "debug") == 0) return LogLevel::Debug;
  return LogLevel::Info;
}

std::atomic<int> g_level{-1};
std::mutex g_write_mu;

const char* tag(LogLevel lvl) {
  switch (lvl) {
    case LogLevel::Error: return "E";
    case LogLevel::Info: return "I";
    case LogLevel::Debug: return "D";
  }
  return "?";
}

}  // namespace

LogLevel level() {
  int lvl = g_level.load(std::memory_order_relaxed);
  if (lvl < 0) {
    lvl = static_cast<int>(parse_env());
    g_level.store(lvl, std::memory_order_relaxed);
  }
  return static_cast<LogLevel>(lvl);
}

void set_level(LogLevel lvl) { g_level.store(static_cast<int>(lvl), std::memory_order_relaxed); }

bool enabled(LogLevel lvl) { return static_cast<int>(lvl) <= static_cast<int>(level()); }

void write(LogLevel lvl, const std::string& msg) {
  using namespace std::chrono;
  const auto now = system_clock::now();
  const std::time_t secs = system_clock::to_time_t(now);
  const auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm_buf{};
  localtime_r(&secs, &tm_buf);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%H:%M:%S", &tm_buf);
  std::lock_guard<std::mutex> lock(g_write_mu);
  std::fprintf(stderr, "%s %s.%03d] %s\n", tag(lvl), stamp, static_cast<int>(ms), msg.c_str());
}

}  // namespace deepspark::logging
