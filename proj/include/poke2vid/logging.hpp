#pragma once

#include <string>

namespace poke2vid {

enum class LogLevel { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3 };

/// Reads POKE2VID_LOG_LEVEL (debug, info, warn, error; default info).
void configure_logging();
void set_log_level(LogLevel level);
LogLevel log_level();

/// Timestamped line on stderr when `level` passes the threshold. Thread-safe.
void log(LogLevel level, const std::string& message);

inline void log_debug(const std::string& m) { log(LogLevel::kDebug, m); }
inline void log_info(const std::string& m) { log(LogLevel::kInfo, m); }
inline void log_warn(const std::string& m) { log(LogLevel::kWarn, m); }
inline void log_error(const std::string& m) { log(LogLevel::kError, m); }

}  // namespace poke2vid
