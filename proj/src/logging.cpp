#include "poke2vid/logging.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <mutex>

namespace poke2vid {

namespace {

std::atomic<int> g_level{static_cast<int>(LogLevel::kInfo)};
std::mutex g_mutex;

const char* label(LogLevel level) {
    switch (level) {
        case LogLevel::kDebug: return "debug";
        case LogLevel::kInfo: return "info";
        case LogLevel::kWarn: return "warn";
        case LogLevel::kError: return "error";
    }
    return "?";
}

}  // namespace

void set_log_level(LogLevel level) { g_level = static_cast<int>(level); }

LogLevel log_level() { return static_cast<LogLevel>(g_level.load()); }

void configure_logging() {
    const char* env = std::getenv("POKE2VID_LOG_LEVEL");
    const std::string level = env ? env : "info";
    if (level == "debug") {
        set_log_level(LogLevel::kDebug);
    } else if (level == "info") {
        set_log_level(LogLevel::kInfo);
    } else if (level == "warn") {
        set_log_level(LogLevel::kWarn);
    } else if (level == "error") {
        set_log_level(LogLevel::kError);
    } else {
        set_log_level(LogLevel::kInfo);
        log_warn("ignoring POKE2VID_LOG_LEVEL='" + level + "', expected debug, info, warn or error");
    }
}

void log(LogLevel level, const std::string& message) {
    if (static_cast<int>(level) < g_level.load()) return;
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
    std::lock_guard lock(g_mutex);
    std::clog << stamp << " [" << label(level) << "] " << message << '\n';
}

}  // namespace poke2vid
