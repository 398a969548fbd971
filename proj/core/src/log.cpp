#include "wbc/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <stdexcept>

namespace wbc {
namespace {

LogLevel initial_level() {
  const char* env = std::getenv("WBC_LOG_LEVEL");
  if (env == nullptr) return LogLevel::warn;
  try {
    return parse_log_level(env);
  } catch (const std::invalid_argument&) {
    return LogLevel::warn;
  }
}

std::atomic<int>& level_slot() {
  static std::atomic<int> level{static_cast<int>(initial_level())};
  return level;
}

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

const char* label(LogLevel level) {
  switch (level) {
    case LogLevel::error:
      return "error";
    case LogLevel::warn:
      return "warn";
    case LogLevel::info:
      return "info";
    case LogLevel::debug:
      return "debug";
  }
  return "?";
}

}  // namespace

LogLevel parse_log_level(std::string_view name) {
  if (name == "error") return LogLevel::error;
  if (name == "warn") return LogLevel::warn;
  if (name == "info") return LogLevel::info;
  if (name == "debug") return LogLevel::debug;
  throw std::invalid_argument("unknown log level '" + std::string(name) + "'");
}

LogLevel log_level() { return static_cast<LogLevel>(level_slot().load()); }

void set_log_level(LogLevel level) { level_slot().store(static_cast<int>(level)); }

void log(LogLevel level, std::string_view message) {
  if (static_cast<int>(level) > level_slot().load()) return;
  std::lock_guard lock(sink_mutex());
  std::cerr << "[wbc " << label(level) << "] " << message << '\n';
}

}  // namespace wbc
