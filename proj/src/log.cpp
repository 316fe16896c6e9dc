#include "nulog/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace nulog::log {
namespace {

std::mutex g_mutex;
Level g_min_level = Level::info;
std::atomic<std::size_t> g_warnings{0};

void default_sink(Level level, const std::string& message) {
    const char* tag = level == Level::warn ? "warning" : level == Level::info ? "info" : "debug";
    std::clog << "[nulog " << tag << "] " << message << '\n';
}

Sink& sink() {
    static Sink s = default_sink;
    return s;
}

}  // namespace

void set_sink(Sink s) {
    std::lock_guard lock(g_mutex);
    sink() = s ? std::move(s) : Sink(default_sink);
}

void set_min_level(Level level) {
    std::lock_guard lock(g_mutex);
    g_min_level = level;
}

void emit(Level level, const std::string& message) {
    if (level == Level::warn) {
        ++g_warnings;
    }
    std::lock_guard lock(g_mutex);
    if (level < g_min_level) {
        return;
    }
    sink()(level, message);
}

std::size_t warning_count() { return g_warnings.load(); }

}  // namespace nulog::log
