#include "a2sc/clock.hpp"

#include "a2sc/error.hpp"

namespace a2sc {

std::string_view to_string(ClockMode m) noexcept {
  switch (m) {
    case ClockMode::real: return "real";
    case ClockMode::scaled: return "scaled";
    case ClockMode::virtual_time: return "virtual";
  }
  return "unknown";
}

void VirtualClock::advance_to(Timestamp t) {
  Timestamp cur = now_.load();
  while (t > cur && !now_.compare_exchange_weak(cur, t)) {
  }
}

ScaledClock::ScaledClock(Timestamp origin, double factor, ClockMode mode)
    : origin_(origin), factor_(factor), mode_(mode), start_(std::chrono::steady_clock::now()) {
  if (!(factor > 0.0)) throw Error(Errc::config_error, "clock speed factor must be positive");
}

Timestamp ScaledClock::now() const {
  const auto elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_);
  return origin_ + static_cast<Timestamp>(elapsed.count() * factor_);
}

std::chrono::nanoseconds ScaledClock::wall_until(Timestamp t) const {
  const Timestamp delta = t - now();
  if (delta <= 0) return std::chrono::nanoseconds::zero();
  return std::chrono::nanoseconds(static_cast<std::int64_t>(static_cast<double>(delta) * 1e6 / factor_));
}

}  // namespace a2sc
