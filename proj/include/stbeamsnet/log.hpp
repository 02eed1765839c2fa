#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

namespace stbn::log {

enum class Level : int { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

/// Verbosity comes from the STBEAMSNET_LOG environment variable
/// (error|warn|info|debug); default is warn.
inline Level threshold() {
  static const Level level = [] {
    const char* env = std::getenv("STBEAMSNET_LOG");
    if (env == nullptr) return Level::kWarn;
    if (std::strcmp(env, "error") == 0) return Level::kError;
    if (std::strcmp(env, "info") == 0) return Level::kInfo;
    if (std::strcmp(env, "debug") == 0) return Level::kDebug;
    return Level::kWarn;
  }();
  return level;
}

inline void emit(Level level, const char* tag, const std::string& msg) {
  if (static_cast<int>(level) > static_cast<int>(threshold())) return;
  std::fprintf(stderr, "[%s] %s\n", tag, msg.c_str());
}

inline void error(const std::string& msg) { emit(Level::kError, "error", msg); }
inline void warn(const std::string& msg) { emit(Level::kWarn, "warn", msg); }
inline void info(const std::string& msg) { emit(Level::kInfo, "info", msg); }
inline void debug(const std::string& msg) { emit(Level::kDebug, "debug", msg); }

}  // namespace stbn::log
