#pragma once

#include <functional>
#include <string>
#include <string_view>

namespace dsrn {

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

using LogSink = std::function<void(LogLevel, std::string_view)>;

void set_log_level(LogLevel level);
LogLevel log_level();

// Replaces the stderr sink; pass an empty function to restore it. Returns the previous sink.
LogSink set_log_sink(LogSink sink);

void log(LogLevel level, std::string_view msg);
inline void log_debug(std::string_view msg) { log(LogLevel::debug, msg); }
inline void log_info(std::string_view msg) { log(LogLevel::info, msg); }
inline void log_warn(std::string_view msg) { log(LogLevel::warn, msg); }

}  // namespace dsrn
