#include "a2sc/logistics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "a2sc/error.hpp"

namespace a2sc {

namespace {

constexpr const char* kHeader = "timestamp_iso8601,lat,lon,elevation_m,temp_c,humidity_pct,light_lux";

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, std::size_t row, const char* column) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || !std::isfinite(v)) {
    throw Error(Errc::malformed_row, "row " + std::to_string(row) + ": bad " + column + " '" + s + "'");
  }
  return v;
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace

Duration Trace::duration() const {
  if (points.empty()) return Duration{0};
  return Duration{points.back().t - points.front().t};
}

std::string format_iso8601(Timestamp ms) {
  const std::time_t secs = static_cast<std::time_t>(ms >= 0 ? ms / 1000 : (ms - 999) / 1000);
  const auto millis = static_cast<int>(ms - static_cast<Timestamp>(secs) * 1000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, millis);
  return out;
}

std::optional<Timestamp> parse_iso8601(std::string_view text) {
  const std::string s(text);
  std::tm tm{};
  int consumed = 0;
  if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &tm.tm_year, &tm.tm_mon, &tm.tm_mday, &tm.tm_hour,
                  &tm.tm_min, &tm.tm_sec, &consumed) != 6 ||
      consumed != 19) {
    return std::nullopt;
  }
  if (tm.tm_mon < 1 || tm.tm_mon > 12 || tm.tm_mday < 1 || tm.tm_mday > 31 || tm.tm_hour > 23 || tm.tm_min > 59 ||
      tm.tm_sec > 60) {
    return std::nullopt;
  }
  std::size_t pos = 19;
  int millis = 0;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    int digits = 0;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos])) != 0) {
      if (digits < 3) millis = millis * 10 + (s[pos] - '0');
      ++digits;
      ++pos;
    }
    if (digits == 0) return std::nullopt;
    for (int d = digits; d < 3; ++d) millis *= 10;
  }
  if (pos + 1 != s.size() || s[pos] != 'Z') return std::nullopt;
  tm.tm_year -= 1900;
  tm.tm_mon -= 1;
  return static_cast<Timestamp>(timegm(&tm)) * 1000 + millis;
}

Trace parse_trace(std::istream& in) {
  Trace trace;
  std::string line;
  std::size_t row = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      header_seen = true;
      if (line == kHeader) continue;
      throw Error(Errc::malformed_row, "row 1: expected header '" + std::string(kHeader) + "'");
    }
    const auto f = split(line);
    if (f.size() != 7) {
      throw Error(Errc::malformed_row, "row " + std::to_string(row) + ": expected 7 fields, got " +
                                           std::to_string(f.size()));
    }
    TracePoint p;
    const auto t = parse_iso8601(f[0]);
    if (!t) throw Error(Errc::malformed_row, "row " + std::to_string(row) + ": bad timestamp '" + f[0] + "'");
    p.t = *t;
    p.latitude = parse_number(f[1], row, "lat");
    p.longitude = parse_number(f[2], row, "lon");
    p.elevation = parse_number(f[3], row, "elevation_m");
    p.temperature = parse_number(f[4], row, "temp_c");
    p.humidity = parse_number(f[5], row, "humidity_pct");
    p.light = parse_number(f[6], row, "light_lux");
    if (!valid(GeoPoint{p.latitude, p.longitude})) {
      throw Error(Errc::malformed_row, "row " + std::to_string(row) + ": coordinates out of range");
    }
    if (p.humidity < 0.0 || p.humidity > 100.0) {
      throw Error(Errc::malformed_row, "row " + std::to_string(row) + ": humidity outside [0,100]");
    }
    if (p.light < 0.0) throw Error(Errc::malformed_row, "row " + std::to_string(row) + ": negative light");
    if (!trace.points.empty()) {
      const auto prev = trace.points.back().t;
      if (p.t <= prev) {
        throw Error(Errc::non_monotonic_timestamps, "row " + std::to_string(row) + ": timestamp not after previous");
      }
      if (p.t - prev > 3 * kNominalCadence.count()) {
        trace.warnings.push_back("row " + std::to_string(row) + ": gap of " + std::to_string(p.t - prev) + " ms");
      }
    }
    trace.points.push_back(p);
  }
  if (trace.points.empty()) throw Error(Errc::empty_trace, "trace has no data rows");
  return trace;
}

Trace load_trace(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(Errc::config_error, "cannot open trace " + file.string());
  return parse_trace(in);
}

void write_trace(std::ostream& out, const Trace& trace) {
  out << kHeader << '\n';
  for (const auto& p : trace.points) {
    out << format_iso8601(p.t) << ',' << fixed(p.latitude, 6) << ',' << fixed(p.longitude, 6) << ','
        << fixed(p.elevation, 1) << ',' << fixed(p.temperature, 2) << ',' << fixed(p.humidity, 1) << ','
        << fixed(p.light, 1) << '\n';
  }
}

Value to_value(const TracePoint& p) {
  return Value{{"t", p.t},
               {"lat", p.latitude},
               {"lon", p.longitude},
               {"elevation_m", p.elevation},
               {"temp_c", p.temperature},
               {"humidity_pct", p.humidity},
               {"light_lux", p.light}};
}

Trace synth_trace(const SynthOptions& o) {
  if (o.speed_mps <= 0.0 || o.cadence.count() <= 0) throw Error(Errc::config_error, "speed and cadence must be > 0");
  const double km = haversine_km(o.from, o.to);
  const double step_km = o.speed_mps * static_cast<double>(o.cadence.count()) / 1e6;
  const auto steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(km / step_km)));
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> temp_noise(0.0, 0.3);
  std::normal_distribution<double> hum_noise(0.0, 1.5);
  std::normal_distribution<double> light_noise(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, 0.00002);
  Trace trace;
  double temp = o.temperature;
  double hum = o.humidity;
  for (std::size_t i = 0; i <= steps; ++i) {
    const double f = static_cast<double>(i) / static_cast<double>(steps);
    TracePoint p;
    p.t = o.start + static_cast<Timestamp>(i) * o.cadence.count();
    const bool endpoint = i == 0 || i == steps;
    p.latitude = o.from.latitude + f * (o.to.latitude - o.from.latitude) + (endpoint ? 0.0 : jitter(rng));
    p.longitude = o.from.longitude + f * (o.to.longitude - o.from.longitude) + (endpoint ? 0.0 : jitter(rng));
    p.elevation = 10.0 + 5.0 * std::sin(f * 3.14159);
    // Mean-reverting walk keeps the readings plausible over long journeys.
    temp += 0.2 * (o.temperature - temp) + temp_noise(rng);
    hum += 0.2 * (o.humidity - hum) + hum_noise(rng);
    p.temperature = temp;
    p.humidity = std::clamp(hum, 0.0, 100.0);
    p.light = std::max(0.0, o.light + light_noise(rng));
    trace.points.push_back(p);
  }
  // Round-trip through the CSV precision so a written trace reloads equal.
  std::stringstream ss;
  write_trace(ss, trace);
  return parse_trace(ss);
}

std::string make_tracking_number(const std::string& carrier, Timestamp now) {
  return carrier + std::to_string(now);
}

std::string TrackingNumbers::next(const std::string& carrier, Timestamp now) {
  auto [it, fresh] = last_.emplace(carrier, now);
  if (!fresh) it->second = now > it->second ? now : it->second + 1;
  return make_tracking_number(carrier, it->second);
}

std::string_view to_string(Channel c) noexcept {
  switch (c) {
    case Channel::temperature: return "temperature";
    case Channel::humidity: return "humidity";
    case Channel::light: return "light";
  }
  return "?";
}

double reading(const TracePoint& p, Channel c) noexcept {
  switch (c) {
    case Channel::temperature: return p.temperature;
    case Channel::humidity: return p.humidity;
    case Channel::light: return p.light;
  }
  return 0.0;
}

const Bounds& Thresholds::of(Channel c) const noexcept {
  switch (c) {
    case Channel::temperature: return temperature;
    case Channel::humidity: return humidity;
    case Channel::light: return light;
  }
  return light;
}

namespace {

Value bounds_value(const Bounds& b) {
  return Value{{"min", b.min ? Value(*b.min) : Value()}, {"max", b.max ? Value(*b.max) : Value()}};
}

Bounds bounds_from(const Value& v, const Bounds& fallback) {
  if (v.is_null()) return fallback;
  if (!v.is_object()) throw Error(Errc::config_error, "threshold bounds must be an object");
  Bounds b;
  if (v.contains("min") && !v["min"].is_null()) b.min = v["min"].get<double>();
  if (v.contains("max") && !v["max"].is_null()) b.max = v["max"].get<double>();
  if (b.min && b.max && *b.min > *b.max) throw Error(Errc::config_error, "threshold min above max");
  return b;
}

}  // namespace

Value to_value(const Thresholds& t) {
  return Value{{"temperature", bounds_value(t.temperature)},
               {"humidity", bounds_value(t.humidity)},
               {"light", bounds_value(t.light)}};
}

Thresholds thresholds_from_value(const Value& v) {
  Thresholds t;
  if (v.is_null()) return t;
  if (!v.is_object()) throw Error(Errc::config_error, "thresholds must be an object");
  t.temperature = bounds_from(v.value("temperature", Value()), t.temperature);
  t.humidity = bounds_from(v.value("humidity", Value()), t.humidity);
  t.light = bounds_from(v.value("light", Value()), t.light);
  return t;
}

Value to_value(const Alert& a) {
  return Value{{"channel", to_string(a.channel)},
               {"value", a.value},
               {"bound", a.bound},
               {"side", a.above ? "above" : "below"},
               {"t", a.t}};
}

std::vector<Alert> check_point(const TracePoint& p, const Thresholds& th) {
  std::vector<Alert> out;
  for (const auto c : kChannels) {
    const auto& b = th.of(c);
    const double v = reading(p, c);
    if (b.max && v > *b.max) {
      out.push_back(Alert{c, v, *b.max, true, p.t});
    } else if (b.min && v < *b.min) {
      out.push_back(Alert{c, v, *b.min, false, p.t});
    }
  }
  return out;
}

std::vector<Alert> monitor(const Trace& trace, const Thresholds& th) {
  std::vector<Alert> out;
  for (const auto& p : trace.points) {
    auto a = check_point(p, th);
    out.insert(out.end(), a.begin(), a.end());
  }
  return out;
}

const ChannelStats& SummaryReport::of(Channel c) const noexcept {
  switch (c) {
    case Channel::temperature: return temperature;
    case Channel::humidity: return humidity;
    case Channel::light: return light;
  }
  return light;
}

SummaryReport generate_report(const Trace& trace, const Thresholds& th) {
  if (trace.points.empty()) throw Error(Errc::empty_trace, "cannot report on an empty trace");
  SummaryReport r;
  const auto n = static_cast<double>(trace.points.size());
  for (const auto c : kChannels) {
    ChannelStats s;
    s.count = trace.points.size();
    s.min = s.max = reading(trace.points.front(), c);
    double sum = 0.0;
    for (const auto& p : trace.points) {
      const double v = reading(p, c);
      s.min = std::min(s.min, v);
      s.max = std::max(s.max, v);
      sum += v;
    }
    s.mean = std::clamp(sum / n, s.min, s.max);
    double ss = 0.0;
    for (const auto& p : trace.points) {
      const double d = reading(p, c) - s.mean;
      ss += d * d;
    }
    s.stddev = std::sqrt(ss / n);
    const auto& b = th.of(c);
    for (const auto& p : trace.points) {
      const double v = reading(p, c);
      if ((b.max && v > *b.max) || (b.min && v < *b.min)) ++s.violations;
    }
    switch (c) {
      case Channel::temperature: r.temperature = s; break;
      case Channel::humidity: r.humidity = s; break;
      case Channel::light: r.light = s; break;
    }
  }
  for (std::size_t i = 1; i < trace.points.size(); ++i) {
    const auto& a = trace.points[i - 1];
    const auto& b = trace.points[i];
    r.path_km += haversine_km({a.latitude, a.longitude}, {b.latitude, b.longitude});
  }
  r.duration = trace.duration();
  if (r.duration.count() > 0) r.average_speed_kmh = r.path_km / (static_cast<double>(r.duration.count()) / 3.6e6);
  return r;
}

Value to_value(const SummaryReport& r) {
  Value channels = Value::object();
  for (const auto c : kChannels) {
    const auto& s = r.of(c);
    channels[std::string(to_string(c))] = Value{{"min", s.min},       {"max", s.max},
                                                {"mean", s.mean},     {"stddev", s.stddev},
                                                {"count", s.count},   {"violations", s.violations}};
  }
  return Value{{"channels", channels},
               {"journey",
                Value{{"duration_ms", r.duration.count()},
                      {"path_km", r.path_km},
                      {"average_speed_kmh", r.average_speed_kmh}}}};
}

std::string_view to_string(DeliveryStatus s) noexcept {
  switch (s) {
    case DeliveryStatus::booked: return "booked";
    case DeliveryStatus::in_transit: return "in-transit";
    case DeliveryStatus::delivered: return "delivered";
    case DeliveryStatus::failed: return "failed";
  }
  return "?";
}

Value to_value(const DeliveryJob& job) {
  Value v{{"tracking_number", job.tracking_number},
          {"order_id", job.order_id},
          {"origin", to_value(job.origin)},
          {"destination", to_value(job.destination)},
          {"carrier", job.carrier.name},
          {"status", to_string(job.status)},
          {"thresholds", to_value(job.thresholds)},
          {"points", job.trace.points.size()}};
  return v;
}

DeliveryReplay::DeliveryReplay(DeliveryJob job) : job_(std::move(job)) {
  if (job_.trace.points.empty()) throw Error(Errc::empty_trace, job_.tracking_number + " has an empty trace");
}

void DeliveryReplay::start(Timestamp now) {
  if (job_.status != DeliveryStatus::booked) {
    throw Error(Errc::already_started, job_.tracking_number + " is " + std::string(to_string(job_.status)));
  }
  job_.status = DeliveryStatus::in_transit;
  start_ = now;
  next_ = 0;
}

std::optional<Timestamp> DeliveryReplay::next_due() const {
  if (job_.status != DeliveryStatus::in_transit || next_ >= job_.trace.points.size()) return std::nullopt;
  return start_ + (job_.trace.points[next_].t - job_.trace.points.front().t);
}

DeliveryReplay::Step DeliveryReplay::advance() {
  if (job_.status != DeliveryStatus::in_transit) {
    throw Error(Errc::invalid_state, job_.tracking_number + " is not in transit");
  }
  Step s;
  s.index = next_;
  s.point = job_.trace.points[next_];
  s.alerts = check_point(s.point, job_.thresholds);
  ++next_;
  s.last = next_ == job_.trace.points.size();
  if (s.last) job_.status = DeliveryStatus::delivered;
  return s;
}

void DeliveryReplay::fail() {
  if (job_.status == DeliveryStatus::booked || job_.status == DeliveryStatus::in_transit) {
    job_.status = DeliveryStatus::failed;
  }
}

}  // namespace a2sc
