#include "cardiosynth/core/log.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>

#include "cardiosynth/core/config.hpp"
#include "cardiosynth/core/error.hpp"

namespace cardiosynth::log {

namespace {
std::atomic<Level> g_level{Level::info};
std::atomic<long> g_warnings{0};
std::mutex g_mutex;

const char* name(Level l) {
  switch (l) {
    case Level::debug:
      return "debug";
    case Level::info:
      return "info";
    case Level::warn:
      return "warn";
    case Level::error:
      return "error";
    case Level::quiet:
      break;
  }
  return "quiet";
}
}  // namespace

Level level() { return g_level.load(); }
void set_level(Level l) { g_level.store(l); }

Level level_from_string(std::string_view s) {
  for (Level l : {Level::debug, Level::info, Level::warn, Level::error, Level::quiet})
    if (s == name(l)) return l;
  throw ConfigError("unknown log level '" + std::string(s) + "'");
}

void write(Level l, std::string_view msg) {
  if (l == Level::warn) ++g_warnings;
  if (l < g_level.load()) return;
  const std::string line = Json{{"level", name(l)}, {"msg", msg}}.dump();
  std::lock_guard lock(g_mutex);
  std::fprintf(stderr, "%s\n", line.c_str());
}

long warning_count() { return g_warnings.load(); }

}  // namespace cardiosynth::log
