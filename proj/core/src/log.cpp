#include "catunet/log.hpp"

#include <cstdlib>
#include <mutex>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>
#include <string>

namespace catunet::log {
namespace {

std::mutex observer_mutex;
std::function<void(Level, std::string_view)> observer;

spdlog::logger& logger() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto l = spdlog::stderr_color_mt("catunet");
    l->set_pattern("[%l] %v");
    l->set_level(spdlog::level::warn);
    return l;
  }();
  return *instance;
}

spdlog::level::level_enum to_spdlog(Level level) {
  switch (level) {
    case Level::debug: return spdlog::level::debug;
    case Level::info: return spdlog::level::info;
    case Level::warn: return spdlog::level::warn;
    case Level::error: return spdlog::level::err;
  }
  return spdlog::level::warn;
}

void emit(Level level, std::string_view message) {
  {
    std::lock_guard lock(observer_mutex);
    if (observer) observer(level, message);
  }
  logger().log(to_spdlog(level), "{}", message);
}

}  // namespace

void init_from_env(Level fallback) {
  Level chosen = fallback;
  if (const char* env = std::getenv("CATU_LOG")) {
    const std::string value(env);
    if (value == "debug") chosen = Level::debug;
    else if (value == "info") chosen = Level::info;
    else if (value == "warn") chosen = Level::warn;
    else if (value == "error") chosen = Level::error;
  }
  set_level(chosen);
}

void set_level(Level level) { logger().set_level(to_spdlog(level)); }

Level level() {
  switch (logger().level()) {
    case spdlog::level::trace:
    case spdlog::level::debug: return Level::debug;
    case spdlog::level::info: return Level::info;
    case spdlog::level::warn: return Level::warn;
    default: return Level::error;
  }
}

void debug(std::string_view message) { emit(Level::debug, message); }
void info(std::string_view message) { emit(Level::info, message); }
void warn(std::string_view message) { emit(Level::warn, message); }
void error(std::string_view message) { emit(Level::error, message); }

void set_observer(std::function<void(Level, std::string_view)> fn) {
  std::lock_guard lock(observer_mutex);
  observer = std::move(fn);
}

}  // namespace catunet::log
