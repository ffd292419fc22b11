#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

namespace boil {

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

// Level comes from BOIL_LOG_LEVEL (error|warn|info|debug), default warn.
inline LogLevel log_level() {
  static LogLevel lvl = [] {
    const char* env = std::getenv("BOIL_LOG_LEVEL");
    if (!env) return LogLevel::Warn;
    if (std::strcmp(env, "error") == 0) return LogLevel::Error;
    if (std::strcmp(env, "warn") == 0) return LogLevel::Warn;
    if (std::strcmp(env, "info") == 0) return LogLevel::Info;
    if (std::strcmp(env, "debug") == 0) return LogLevel::Debug;
    return LogLevel::Warn;
  }();
  return lvl;
}

inline void log_msg(LogLevel lvl, const std::string& msg) {
  if (lvl > log_level()) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::fprintf(stderr, "[%s] %s\n", names[static_cast<int>(lvl)], msg.c_str());
}

inline void log_error(const std::string& m) { log_msg(LogLevel::Error, m); }
inline void log_warn(const std::string& m) { log_msg(LogLevel::Warn, m); }
inline void log_info(const std::string& m) { log_msg(LogLevel::Info, m); }
inline void log_debug(const std::string& m) { log_msg(LogLevel::Debug, m); }

}  // namespace boil
