#include "jexpand/log.hpp"

#include <iostream>
#include <mutex>

namespace jexpand::log {

namespace {

std::mutex g_mutex;

void default_sink(Level level, const std::string& message) {
  std::cerr << (level == Level::warning ? "[warn] " : "[info] ") << message << '\n';
}

Sink& sink() {
  static Sink s = default_sink;
  return s;
}

}  // namespace

Sink set_sink(Sink s) {
  std::lock_guard lock(g_mutex);
  auto old = std::move(sink());
  sink() = s ? std::move(s) : Sink(default_sink);
  return old;
}

void info(const std::string& message) {
  std::lock_guard lock(g_mutex);
  sink()(Level::info, message);
}

void warn(const std::string& message) {
  std::lock_guard lock(g_mutex);
  sink()(Level::warning, message);
}

}  // namespace jexpand::log
