#include "cogo/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace cogo {

namespace {
std::atomic<LogLevel> g_level{LogLevel::info};
std::atomic<std::size_t> g_warnings{0};
std::mutex g_mutex;
}  // namespace

void set_log_level(LogLevel level) { g_level = level; }
LogLevel log_level() { return g_level; }

void log(LogLevel level, std::string_view message) {
  if (level == LogLevel::warn) ++g_warnings;
  if (level < g_level.load()) return;
  static constexpr const char* kNames[] = {"debug", "info", "warn", "error"};
  std::lock_guard<std::mutex> lock(g_mutex);
  std::cerr << "[cogo " << kNames[static_cast<int>(level)] << "] " << message << '\n';
}

std::size_t warning_count() { return g_warnings; }

}  // namespace cogo
