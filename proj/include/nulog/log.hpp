#pragma once

#include <functional>
#include <string>

namespace nulog::log {

enum class Level { debug, info, warn };

using Sink = std::function<void(Level, const std::string&)>;

/// Replaces the process-wide sink. Default writes info/warn to stderr.
void set_sink(Sink sink);
void set_min_level(Level level);

void emit(Level level, const std::string& message);

inline void debug(const std::string& message) { emit(Level::debug, message); }
inline void info(const std::string& message) { emit(Level::info, message); }
inline void warn(const std::string& message) { emit(Level::warn, message); }

/// Number of warnings emitted since start-up (used by tests).
std::size_t warning_count();

}  // namespace nulog::log
