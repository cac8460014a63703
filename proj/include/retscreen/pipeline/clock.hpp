#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>

namespace retscreen::pipeline {

/// Time source for event timestamps and stage timings. Injectable so tests
/// can produce byte-identical logs.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::int64_t wall_ms() = 0;  // milliseconds since the Unix epoch
  virtual double monotonic_ms() = 0;
};

class SystemClock final : public Clock {
 public:
  std::int64_t wall_ms() override;
  double monotonic_ms() override;
};

/// Deterministic clock: every read advances by a fixed step.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(std::int64_t start_ms = 1767225600000, double step_ms = 1.0)
      : wall_(start_ms), mono_(0.0), step_(step_ms) {}
  std::int64_t wall_ms() override;
  double monotonic_ms() override;

 private:
  std::mutex mu_;
  std::int64_t wall_;
  double mono_;
  double step_;
};

std::shared_ptr<Clock> system_clock();

/// ISO-8601 UTC with milliseconds, e.g. 2026-01-01T00:00:00.000Z.
std::string format_timestamp(std::int64_t epoch_ms);

}  // namespace retscreen::pipeline
