#pragma once

#include <string>
#include <string_view>

namespace wbc {

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

// Initial level comes from WBC_LOG_LEVEL (error|warn|info|debug), default warn.
LogLevel log_level();
void set_log_level(LogLevel level);
LogLevel parse_log_level(std::string_view name);

// Thread-safe line-at-a-time write to stderr.
void log(LogLevel level, std::string_view message);

}  // namespace wbc
