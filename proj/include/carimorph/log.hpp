#pragma once

#include <cstdlib>
#include <iostream>
#include <string>
#include <string_view>

namespace carimorph::log {

enum class Level { Quiet = 0, Error = 1, Warn = 2, Info = 3, Debug = 4 };

/// Read once from CARIMORPH_LOG: quiet|error|warn|info|debug or 0-4. Default warn.
inline Level threshold() {
  static const Level level = [] {
    const char* env = std::getenv("CARIMORPH_LOG");
    if (env == nullptr) return Level::Warn;
    const std::string_view v(env);
    if (v == "quiet" || v == "0") return Level::Quiet;
    if (v == "error" || v == "1") return Level::Error;
    if (v == "warn" || v == "2") return Level::Warn;
    if (v == "info" || v == "3") return Level::Info;
    if (v == "debug" || v == "4") return Level::Debug;
    return Level::Warn;
  }();
  return level;
}

inline bool enabled(Level level) { return static_cast<int>(level) <= static_cast<int>(threshold()); }

inline void write(Level level, std::string_view tag, const std::string& message) {
  if (enabled(level)) std::cerr << "carimorph " << tag << ": " << message << '\n';
}

inline void error(const std::string& m) { write(Level::Error, "error", m); }
inline void warn(const std::string& m) { write(Level::Warn, "warn", m); }
inline void info(const std::string& m) { write(Level::Info, "info", m); }
inline void debug(const std::string& m) { write(Level::Debug, "debug", m); }

}  // namespace carimorph::log
