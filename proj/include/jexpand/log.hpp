#pragma once

#include <functional>
#include <string>

namespace jexpand::log {

enum class Level { info, warning };

using Sink = std::function<void(Level, const std::string&)>;

/// Replaces the process-wide sink (stderr by default). Returns the old one.
Sink set_sink(Sink sink);

void info(const std::string& message);
void warn(const std::string& message);

}  // namespace jexpand::log
