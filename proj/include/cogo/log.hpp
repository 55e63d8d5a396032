#pragma once

#include <cstddef>
#include <string_view>

namespace cogo {

enum class LogLevel { debug, info, warn, error, off };

void set_log_level(LogLevel level);
LogLevel log_level();

void log(LogLevel level, std::string_view message);
inline void log_info(std::string_view m) { log(LogLevel::info, m); }
inline void log_warn(std::string_view m) { log(LogLevel::warn, m); }

/// Number of warnings issued since start-up, including suppressed ones.
std::size_t warning_count();

}  // namespace cogo
