#pragma once

#include <atomic>
#include <chrono>
#include <string_view>

#include "a2sc/messaging.hpp"

namespace a2sc {

enum class ClockMode { real, scaled, virtual_time };

std::string_view to_string(ClockMode m) noexcept;

struct ClockSpec {
  ClockMode mode = ClockMode::virtual_time;
  double factor = 1.0;             // scaled only
  Timestamp origin = 1594666100000;  // clock reading at start (scaled/virtual)

  bool operator==(const ClockSpec&) const = default;
};

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Timestamp now() const = 0;
  virtual ClockMode mode() const = 0;
  /// Wall time until the clock reads `t`; zero if already past.
  virtual std::chrono::nanoseconds wall_until(Timestamp t) const = 0;
};

/// Moves only when told to.
class VirtualClock final : public Clock {
 public:
  explicit VirtualClock(Timestamp start) : now_(start) {}

  Timestamp now() const override { return now_.load(); }
  ClockMode mode() const override { return ClockMode::virtual_time; }
  std::chrono::nanoseconds wall_until(Timestamp) const override { return std::chrono::nanoseconds::zero(); }

  /// Never moves backwards.
  void advance_to(Timestamp t);

 private:
  std::atomic<Timestamp> now_;
};

/// Steady wall time multiplied by `factor`, anchored at `origin`.
class ScaledClock final : public Clock {
 public:
  ScaledClock(Timestamp origin, double factor, ClockMode mode = ClockMode::scaled);

  Timestamp now() const override;
  ClockMode mode() const override { return mode_; }
  std::chrono::nanoseconds wall_until(Timestamp t) const override;
  double factor() const noexcept { return factor_; }

 private:
  Timestamp origin_;
  double factor_;
  ClockMode mode_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace a2sc
