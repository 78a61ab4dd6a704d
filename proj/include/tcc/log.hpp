#pragma once

#include <functional>
#include <iostream>
#include <string>

namespace tcc {

enum class LogLevel { Info, Warning, Error };

using LogSink = std::function<void(LogLevel, const std::string&)>;

inline LogSink& log_sink() {
  static LogSink sink = [](LogLevel level, const std::string& msg) {
    const char* tag = level == LogLevel::Info ? "info" : level == LogLevel::Warning ? "warning" : "error";
    std::cerr << "[" << tag << "] " << msg << '\n';
  };
  return sink;
}

inline void log_info(const std::string& msg) { log_sink()(LogLevel::Info, msg); }
inline void log_warning(const std::string& msg) { log_sink()(LogLevel::Warning, msg); }
inline void log_error(const std::string& msg) { log_sink()(LogLevel::Error, msg); }

// Swaps the process-wide sink for the lifetime of the guard.
class ScopedLogSink {
 public:
  explicit ScopedLogSink(LogSink sink) : prev_(std::move(log_sink())) { log_sink() = std::move(sink); }
  ~ScopedLogSink() { log_sink() = std::move(prev_); }
  ScopedLogSink(const ScopedLogSink&) = delete;
  ScopedLogSink& operator=(const ScopedLogSink&) = delete;

 private:
  LogSink prev_;
};

}  // namespace tcc
