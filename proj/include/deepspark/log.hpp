#pragma once

#include <sstream>
#include <string>

namespace deepspark {

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

// Verbosity is read once from DEEPSPARK_LOG (error|info|debug, default info).
namespace logging {
LogLevel level();
void set_level(LogLevel lvl);
bool enabled(LogLevel lvl);
void write(LogLevel lvl, const std::string& msg);

// Stream-style sink that flushes one line on destruction.
class Line {
 public:
  explicit Line(LogLevel lvl) : lvl_(lvl) {}
  ~Line() {
    if (enabled(lvl_)) write(lvl_, os_.str());
  }
  template <typename T>
  Line& operator<<(const T& v) {
    os_ << v;
    return *this;
  }

 private:
  LogLevel lvl_;
  std::ostringstream os_;
};
}  // namespace logging

#define DS_LOG_ERROR ::deepspark::logging::Line(::deepspark::LogLevel::Error)
#define DS_LOG_INFO ::deepspark::logging::Line(::deepspark::LogLevel::Info)
#define DS_LOG_DEBUG ::deepspark::logging::Line(::deepspark::LogLevel::Debug)

}  // namespace deepspark
