#pragma once

#include <functional>
#include <string_view>

namespace catunet::log {

enum class Level { debug, info, warn, error };

/// Reads CATU_LOG (error|warn|info|debug); unset or unknown keeps `fallback`.
void init_from_env(Level fallback = Level::warn);
void set_level(Level level);
Level level();

void debug(std::string_view message);
void info(std::string_view message);
void warn(std::string_view message);
void error(std::string_view message);

/// Observer invoked for every message regardless of level; pass an empty
/// function to remove it. Tests use this to assert that warnings are raised.
void set_observer(std::function<void(Level, std::string_view)> observer);

}  // namespace catunet::log
