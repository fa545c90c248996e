#pragma once

#include <functional>
#include <string>

namespace fri {

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

using LogSink = std::function<void(LogLevel, const std::string&)>;

// Default sink writes warnings and errors to stderr.
void set_log_sink(LogSink sink);
void set_log_level(LogLevel level);
void log(LogLevel level, const std::string& msg);

inline void log_info(const std::string& m) { log(LogLevel::info, m); }
inline void log_warn(const std::string& m) { log(LogLevel::warn, m); }

}  // namespace fri
