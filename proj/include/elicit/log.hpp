#pragma once

#include <functional>
#include <string>

namespace elicit {

enum class LogLevel { Debug, Info, Warn, Error };

using LogSink = std::function<void(LogLevel, const std::string&)>;

// Replaces the process-wide sink; the default writes Warn and above to stderr.
void set_log_sink(LogSink sink);
void log(LogLevel level, const std::string& message);

inline void log_warning(const std::string& message) { log(LogLevel::Warn, message); }
inline void log_info(const std::string& message) { log(LogLevel::Info, message); }

}  // namespace elicit
