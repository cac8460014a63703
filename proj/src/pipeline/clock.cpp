#include "retscreen/pipeline/clock.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>

namespace retscreen::pipeline {

std::int64_t SystemClock::wall_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

double SystemClock::monotonic_ms() {
  using namespace std::chrono;
  return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
}

std::int64_t ManualClock::wall_ms() {
  std::lock_guard lock(mu_);
  const auto now = wall_;
  wall_ += static_cast<std::int64_t>(step_);
  return now;
}

double ManualClock::monotonic_ms() {
  std::lock_guard lock(mu_);
  const auto now = mono_;
  mono_ += step_;
  return now;
}

std::shared_ptr<Clock> system_clock() {
  static auto clock = std::make_shared<SystemClock>();
  return clock;
}

std::string format_timestamp(std::int64_t epoch_ms) {
  auto secs = static_cast<std::time_t>(epoch_ms / 1000);
  auto millis = static_cast<int>(epoch_ms % 1000);
  if (millis < 0) {
    millis += 1000;
    secs -= 1;
  }
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, millis);
  return buf;
}

}  // namespace retscreen::pipeline
