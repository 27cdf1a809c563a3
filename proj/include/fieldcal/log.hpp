#pragma once

#include <string_view>

namespace fieldcal::log {

enum class Level { error = 0, info = 1, debug = 2 };

// Read from FIELDCAL_LOG (error|info|debug) on first use; defaults to info.
Level level();
void set_level(Level level);

void write(Level level, std::string_view message);

inline void error(std::string_view m) { write(Level::error, m); }
inline void info(std::string_view m) { write(Level::info, m); }
inline void debug(std::string_view m) { write(Level::debug, m); }

}  // namespace fieldcal::log
