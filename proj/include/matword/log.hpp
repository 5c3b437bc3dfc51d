#pragma once

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <string_view>

namespace matword::log {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

/// Verbosity from MATWORD_LOG (error|warn|info|debug); defaults to warn.
inline Level threshold() {
  static const Level level = [] {
    const char* env = std::getenv("MATWORD_LOG");
    const std::string_view v = env ? env : "";
    if (v == "error") return Level::Error;
    if (v == "info") return Level::Info;
    if (v == "debug") return Level::Debug;
    return Level::Warn;
  }();
  return level;
}

template <class... Args>
void write(Level level, const Args&... args) {
  if (level > threshold()) return;
  static constexpr std::string_view tags[] = {"error", "warn", "info", "debug"};
  std::ostringstream os;
  os << "[matword " << tags[static_cast<int>(level)] << "] ";
  (os << ... << args);
  os << '\n';
  std::cerr << os.str();
}

template <class... Args>
void error(const Args&... args) { write(Level::Error, args...); }
template <class... Args>
void warn(const Args&... args) { write(Level::Warn, args...); }
template <class... Args>
void info(const Args&... args) { write(Level::Info, args...); }
template <class... Args>
void debug(const Args&... args) { write(Level::Debug, args...); }

}  // namespace matword::log
