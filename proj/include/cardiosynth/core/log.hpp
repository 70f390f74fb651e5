#pragma once

#include <string>
#include <string_view>

namespace cardiosynth::log {

enum class Level { debug, info, warn, error, quiet };

Level level();
void set_level(Level l);
Level level_from_string(std::string_view s);

/// One JSON object per line on stderr.
void write(Level l, std::string_view msg);
inline void debug(std::string_view m) { write(Level::debug, m); }
inline void info(std::string_view m) { write(Level::info, m); }
inline void warn(std::string_view m) { write(Level::warn, m); }

/// Number of warnings emitted so far in this process.
long warning_count();

}  // namespace cardiosynth::log
