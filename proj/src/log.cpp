#include "dsrn/log.hpp"

#include "dsrn/errors.hpp"

#include <iostream>
#include <mutex>

namespace dsrn {

namespace {

std::mutex g_mutex;
LogLevel g_level = LogLevel::warn;
LogSink g_sink;

const char* level_tag(LogLevel level) {
    switch (level) {
        case LogLevel::debug: return "debug";
        case LogLevel::info: return "info";
        case LogLevel::warn: return "warning";
        case LogLevel::error: return "error";
        case LogLevel::off: break;
    }
    return "";
}

}  // namespace

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::format: return "format error";
        case ErrorCode::dimension: return "dimension error";
        case ErrorCode::config: return "config error";
        case ErrorCode::data: return "data error";
        case ErrorCode::io: return "io error";
        case ErrorCode::numeric: return "numeric error";
        case ErrorCode::corrupt: return "corrupt archive";
        case ErrorCode::version: return "version mismatch";
        case ErrorCode::usage: return "usage error";
        case ErrorCode::unsupported: return "unsupported";
    }
    return "unknown error";
}

void set_log_level(LogLevel level) {
    std::lock_guard lock(g_mutex);
    g_level = level;
}

LogLevel log_level() {
    std::lock_guard lock(g_mutex);
    return g_level;
}

LogSink set_log_sink(LogSink sink) {
    std::lock_guard lock(g_mutex);
    std::swap(g_sink, sink);
    return sink;
}

void log(LogLevel level, std::string_view msg) {
    std::lock_guard lock(g_mutex);
    if (g_sink) {
        // Custom sinks see every message; filtering is their business.
        g_sink(level, msg);
        return;
    }
    if (level < g_level || level == LogLevel::off) return;
    std::cerr << "[dsrn] " << level_tag(level) << ": " << msg << '\n';
}

}  // namespace dsrn
