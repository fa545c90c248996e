#include "fri/log.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>

namespace fri {

namespace {
std::mutex g_mu;
LogSink g_sink;
std::atomic<int> g_level{int(LogLevel::warn)};

const char* tag(LogLevel l) {
  switch (l) {
    case LogLevel::debug: return "debug";
    case LogLevel::info: return "info";
    case LogLevel::warn: return "warn";
    case LogLevel::error: return "error";
    default: return "";
  }
}
}  // namespace

void set_log_sink(LogSink sink) {
  std::lock_guard<std::mutex> lk(g_mu);
  g_sink = std::move(sink);
}

void set_log_level(LogLevel level) { g_level = int(level); }

void log(LogLevel level, const std::string& msg) {
  if (int(level) < g_level.load()) return;
  std::lock_guard<std::mutex> lk(g_mu);
  if (g_sink) {
    g_sink(level, msg);
    return;
  }
  std::fprintf(stderr, "[fri %s] %s\n", tag(level), msg.c_str());
}

}  // namespace fri
