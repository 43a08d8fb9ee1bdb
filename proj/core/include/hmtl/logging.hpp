#pragma once

#include <sstream>
#include <string>

namespace hmtl {

enum class LogLevel { kDebug = 0, kInfo = 1, kWarning = 2, kError = 3, kSilent = 4 };

// Messages below this level are dropped. Defaults to kWarning, or to the
// value of HMTL_LOG_LEVEL (debug|info|warning|error|silent) when set.
void set_log_level(LogLevel level);
LogLevel log_level();

void log_message(LogLevel level, const std::string& message);

namespace internal {

class LogLine {
 public:
  explicit LogLine(LogLevel level) : level_(level) {}
  ~LogLine() { log_message(level_, stream_.str()); }
  template <typename T>
  LogLine& operator<<(const T& value) {
    stream_ << value;
    return *this;
  }

 private:
  LogLevel level_;
  std::ostringstream stream_;
};

}  // namespace internal

inline internal::LogLine log_info() { return internal::LogLine(LogLevel::kInfo); }
inline internal::LogLine log_warning() { return internal::LogLine(LogLevel::kWarning); }
inline internal::LogLine log_debug() { return internal::LogLine(LogLevel::kDebug); }

}  // namespace hmtl
