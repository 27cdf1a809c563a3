#include "fieldcal/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace fieldcal::log {
namespace {

Level from_env() {
  const char* env = std::getenv("FIELDCAL_LOG");
  if (env == nullptr) return Level::info;
  const std::string v(env);
  if (v == "error") return Level::error;
  if (v == "debug") return Level::debug;
  return Level::info;
}

std::atomic<int>& current() {
  static std::atomic<int> lvl{static_cast<int>(from_env())};
  return lvl;
}

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

Level level() { return static_cast<Level>(current().load()); }

void set_level(Level lvl) { current().store(static_cast<int>(lvl)); }

void write(Level lvl, std::string_view message) {
  if (static_cast<int>(lvl) > current().load()) return;
  static constexpr const char* tags[] = {"error", "info", "debug"};
  std::lock_guard<std::mutex> lock(sink_mutex());
  std::cerr << "[fieldcal " << tags[static_cast<int>(lvl)] << "] " << message << '\n';
}

}  // namespace fieldcal::log
