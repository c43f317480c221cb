#pragma once

// Delivery telemetry: trace files, replay of a trace as a live journey,
// threshold monitoring and the post-delivery summary report.
//
// Trace CSV (UTF-8, '\n' line ends, header row required):
//
//   timestamp_iso8601,lat,lon,elevation_m,temp_c,humidity_pct,light_lux
//   2020-07-13T18:48:20.000Z,52.205300,0.121800,12.0,4.10,71.2,3.0

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "a2sc/discovery.hpp"
#include "a2sc/messaging.hpp"

namespace a2sc {

struct TracePoint {
  Timestamp t = 0;
  double latitude = 0.0;
  double longitude = 0.0;
  double elevation = 0.0;
  double temperature = 0.0;
  double humidity = 0.0;
  double light = 0.0;

  bool operator==(const TracePoint&) const = default;
};

struct Trace {
  std::vector<TracePoint> points;
  std::vector<std::string> warnings;  // cadence gaps found at load

  Duration duration() const;
};

inline constexpr Duration kNominalCadence{5'000};

std::string format_iso8601(Timestamp ms);
/// Accepts YYYY-MM-DDTHH:MM:SS[.fff]Z; nullopt otherwise.
std::optional<Timestamp> parse_iso8601(std::string_view text);

/// Throws Error{malformed_row}, Error{non_monotonic_timestamps} or
/// Error{empty_trace}. Gaps over three cadences become warnings.
Trace parse_trace(std::istream& in);
Trace load_trace(const std::filesystem::path& file);
void write_trace(std::ostream& out, const Trace& trace);

Value to_value(const TracePoint& p);

struct SynthOptions {
  GeoPoint from{52.2053, 0.1218};
  GeoPoint to{52.1889, 0.1507};
  double speed_mps = 8.0;
  Duration cadence = kNominalCadence;
  Timestamp start = 1594666100000;
  std::uint64_t seed = 1;
  double temperature = 4.0;  // mean, degC
  double humidity = 70.0;    // mean, %RH
  double light = 5.0;        // mean, lux (closed trailer)
};

/// Straight-line journey with seeded sensor noise.
Trace synth_trace(const SynthOptions& opts);

// -- tracking numbers ---------------------------------------------------------------

/// `carrier` followed by the decimal epoch milliseconds.
std::string make_tracking_number(const std::string& carrier, Timestamp now);

/// Hands out unique tracking numbers: a call in an already used millisecond
/// gets the last issued millisecond plus one.
class TrackingNumbers {
 public:
  std::string next(const std::string& carrier, Timestamp now);

 private:
  std::map<std::string, Timestamp> last_;
};

// -- thresholds and alerts --------------------------------------------------------------

enum class Channel { temperature, humidity, light };

std::string_view to_string(Channel c) noexcept;
double reading(const TracePoint& p, Channel c) noexcept;
inline constexpr Channel kChannels[] = {Channel::temperature, Channel::humidity, Channel::light};

struct Bounds {
  std::optional<double> min;
  std::optional<double> max;

  bool operator==(const Bounds&) const = default;
};

struct Thresholds {
  Bounds temperature{0.0, 8.0};
  Bounds humidity{30.0, 95.0};
  Bounds light{};

  const Bounds& of(Channel c) const noexcept;
  bool operator==(const Thresholds&) const = default;
};

Value to_value(const Thresholds& t);
Thresholds thresholds_from_value(const Value& v);

struct Alert {
  Channel channel = Channel::temperature;
  double value = 0.0;
  double bound = 0.0;
  bool above = true;  // above max, else below min
  Timestamp t = 0;

  bool operator==(const Alert&) const = default;
};

Value to_value(const Alert& a);

/// One alert per channel reading strictly outside its bounds.
std::vector<Alert> check_point(const TracePoint& p, const Thresholds& th);
std::vector<Alert> monitor(const Trace& trace, const Thresholds& th);

// -- report ---------------------------------------------------------------------------

struct ChannelStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double stddev = 0.0;  // population
  std::size_t count = 0;
  std::size_t violations = 0;
};

struct SummaryReport {
  ChannelStats temperature;
  ChannelStats humidity;
  ChannelStats light;
  Duration duration{0};
  double path_km = 0.0;
  double average_speed_kmh = 0.0;  // 0 when the duration is 0

  const ChannelStats& of(Channel c) const noexcept;
};

/// Throws Error{empty_trace}.
SummaryReport generate_report(const Trace& trace, const Thresholds& th);
Value to_value(const SummaryReport& r);

// -- deliveries -------------------------------------------------------------------------

enum class DeliveryStatus { booked, in_transit, delivered, failed };

std::string_view to_string(DeliveryStatus s) noexcept;

struct DeliveryJob {
  std::string tracking_number;
  std::string order_id;
  GeoPoint origin;
  GeoPoint destination;
  AgentAddress carrier;
  Trace trace;
  DeliveryStatus status = DeliveryStatus::booked;
  Thresholds thresholds;
};

Value to_value(const DeliveryJob& job);  // without the trace points

/// Replays a job's trace against the runtime clock: point i falls due at
/// start + (t_i - t_0). The caller emits each step when its time comes.
class DeliveryReplay {
 public:
  struct Step {
    std::size_t index = 0;
    TracePoint point;
    std::vector<Alert> alerts;
    bool last = false;
  };

  explicit DeliveryReplay(DeliveryJob job);

  /// booked -> in-transit. Throws Error{already_started}.
  void start(Timestamp now);
  std::optional<Timestamp> next_due() const;
  /// Emits the next point; the last one moves the job to delivered.
  /// Throws Error{invalid_state} when not in transit.
  Step advance();
  void fail();

  const DeliveryJob& job() const noexcept { return job_; }
  std::size_t emitted() const noexcept { return next_; }
  Timestamp started_at() const noexcept { return start_; }

 private:
  DeliveryJob job_;
  Timestamp start_ = 0;
  std::size_t next_ = 0;
};

}  // namespace a2sc
