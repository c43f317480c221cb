#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

#include "a2sc/clock.hpp"
#include "a2sc/error.hpp"
#include "a2sc/logistics.hpp"
#include "support/matchmaking.hpp"

using namespace a2sc;

namespace {

constexpr const char* kHeader = "timestamp_iso8601,lat,lon,elevation_m,temp_c,humidity_pct,light_lux\n";

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return Errc::config_error;
}

Trace parse(const std::string& csv) {
  std::istringstream in(csv);
  return parse_trace(in);
}

TracePoint point(Timestamp t, double temp, double lat = 52.2, double lon = 0.12) {
  return TracePoint{t, lat, lon, 10.0, temp, 70.0, 3.0};
}

Trace random_trace(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> temp(-2.0, 12.0), hum(20.0, 100.0), light(0.0, 50.0), step(-0.01, 0.01);
  Trace tr;
  Timestamp t = 1594666100000;
  double lat = 52.2, lon = 0.12;
  for (std::size_t i = 0; i < n; ++i) {
    t += 1 + static_cast<Timestamp>(rng() % 10000);
    lat += step(rng);
    lon += step(rng);
    tr.points.push_back(TracePoint{t, lat, lon, 10.0, temp(rng), hum(rng), light(rng)});
  }
  return tr;
}

DeliveryJob job_with(Trace tr) {
  DeliveryJob job;
  job.tracking_number = "Hermes1";
  job.order_id = "o1";
  job.carrier = local_address("hermes");
  job.trace = std::move(tr);
  return job;
}

}  // namespace

TEST(Iso8601, FormatAndParse) {
  EXPECT_EQ(format_iso8601(0), "1970-01-01T00:00:00.000Z");
  EXPECT_EQ(format_iso8601(1594666100000), "2020-07-13T18:48:20.000Z");
  EXPECT_EQ(parse_iso8601("2020-07-13T18:48:20.000Z"), 1594666100000);
  EXPECT_EQ(parse_iso8601("2020-07-13T18:48:20Z"), 1594666100000);
  EXPECT_EQ(parse_iso8601("2020-07-13T18:48:20.5Z"), 1594666100500);
  EXPECT_FALSE(parse_iso8601("2020-07-13 18:48:20Z"));
  EXPECT_FALSE(parse_iso8601("2020-13-13T18:48:20Z"));
  EXPECT_FALSE(parse_iso8601("2020-07-13T18:48:20.000"));
  EXPECT_FALSE(parse_iso8601("2020-07-13T18:48:20.Z"));
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const Timestamp t = static_cast<Timestamp>(rng() % 4'000'000'000'000ULL);
    ASSERT_EQ(parse_iso8601(format_iso8601(t)), t);
  }
}

TEST(TraceParse, RowsBecomePoints) {
  const auto tr = parse(std::string(kHeader) +
                        "2020-07-13T18:48:20.000Z,52.205300,0.121800,12.0,4.10,71.2,3.0\n"
                        "2020-07-13T18:48:25.000Z,52.205400,0.121900,12.1,4.20,71.0,3.1\r\n"
                        "\n"
                        "2020-07-13T18:48:30.000Z,52.205500,0.122000,12.2,4.30,70.8,3.2\n");
  ASSERT_EQ(tr.points.size(), 3u);
  EXPECT_EQ(tr.points[1], (TracePoint{1594666105000, 52.2054, 0.1219, 12.1, 4.2, 71.0, 3.1}));
  EXPECT_TRUE(tr.warnings.empty());
  EXPECT_EQ(tr.duration(), Duration{10000});
}

TEST(TraceParse, Errors) {
  const std::string row = "2020-07-13T18:48:20.000Z,52.2,0.12,12.0,4.1,71.2,3.0\n";
  EXPECT_EQ(code_of([&] { parse(std::string(kHeader) + row + row); }), Errc::non_monotonic_timestamps);
  EXPECT_EQ(code_of([] { parse(std::string(kHeader) + "2020-07-13T18:48:20.000Z,52.2,0.12,12.0,4.1,140,3.0\n"); }),
            Errc::malformed_row);
  EXPECT_EQ(code_of([] { parse(std::string(kHeader) + "2020-07-13T18:48:20.000Z,95.0,0.12,12.0,4.1,70,3.0\n"); }),
            Errc::malformed_row);
  EXPECT_EQ(code_of([] { parse(std::string(kHeader) + "2020-07-13T18:48:20.000Z,52.2,0.12,12.0,warm,70,3.0\n"); }),
            Errc::malformed_row);
  EXPECT_EQ(code_of([] { parse(std::string(kHeader) + "2020-07-13T18:48:20.000Z,52.2,0.12,12.0,4.1,70\n"); }),
            Errc::malformed_row);
  EXPECT_EQ(code_of([] { parse(std::string(kHeader) + "2020-07-13T18:48:20.000Z,52.2,0.12,12.0,4.1,70,-1\n"); }),
            Errc::malformed_row);
  EXPECT_EQ(code_of([&] { parse(row); }), Errc::malformed_row);
  EXPECT_EQ(code_of([] { parse(kHeader); }), Errc::empty_trace);
  EXPECT_EQ(code_of([] { parse(""); }), Errc::empty_trace);
}

TEST(TraceParse, GapsWarnButLoad) {
  const auto tr = parse(std::string(kHeader) +
                        "2020-07-13T18:48:20.000Z,52.2,0.12,12.0,4.1,71.2,3.0\n"
                        "2020-07-13T18:48:35.000Z,52.2,0.12,12.0,4.1,71.2,3.0\n"
                        "2020-07-13T18:49:35.000Z,52.2,0.12,12.0,4.1,71.2,3.0\n");
  EXPECT_EQ(tr.points.size(), 3u);
  // 15 s is exactly three cadences; only the 60 s gap warns.
  ASSERT_EQ(tr.warnings.size(), 1u);
  EXPECT_NE(tr.warnings[0].find("60000"), std::string::npos);
}

TEST(TraceFile, WriteReloadIsByteIdentical) {
  std::mt19937_64 rng(4);
  SynthOptions o;
  o.seed = 9;
  const auto tr = synth_trace(o);
  std::ostringstream first;
  write_trace(first, tr);
  std::istringstream in(first.str());
  const auto back = parse_trace(in);
  EXPECT_EQ(back.points, tr.points);
  std::ostringstream second;
  write_trace(second, back);
  EXPECT_EQ(second.str(), first.str());
}

TEST(TraceFile, ShippedTracesLoad) {
  for (const auto* name : {"hermes-1", "hermes-2", "dpd-1", "dpd-2"}) {
    const auto tr = load_trace(std::filesystem::path(A2SC_DATA_DIR) / "traces" / (std::string(name) + ".csv"));
    EXPECT_GT(tr.points.size(), 10u) << name;
    EXPECT_TRUE(tr.warnings.empty()) << name;
  }
  EXPECT_EQ(code_of([] { load_trace("/nonexistent/trace.csv"); }), Errc::config_error);
}

TEST(SynthTrace, Deterministic) {
  SynthOptions o;
  o.seed = 17;
  EXPECT_EQ(synth_trace(o).points, synth_trace(o).points);
  const auto tr = synth_trace(o);
  EXPECT_EQ(tr.points.front().latitude, o.from.latitude);
  EXPECT_EQ(tr.points.back().longitude, o.to.longitude);
  o.seed = 18;
  EXPECT_NE(synth_trace(o).points, tr.points);
  o.speed_mps = 0;
  EXPECT_EQ(code_of([&] { synth_trace(o); }), Errc::config_error);
}

TEST(TrackingNumbers, Format) {
  EXPECT_EQ(make_tracking_number("Hermes", 1594666109633), "Hermes1594666109633");
  EXPECT_EQ(make_tracking_number("DPD", 0), "DPD0");
}

TEST(TrackingNumbers, UniqueWithinAMillisecond) {
  TrackingNumbers tn;
  EXPECT_EQ(tn.next("Hermes", 1000), "Hermes1000");
  EXPECT_EQ(tn.next("Hermes", 1000), "Hermes1001");
  EXPECT_EQ(tn.next("Hermes", 1000), "Hermes1002");
  EXPECT_EQ(tn.next("Hermes", 1001), "Hermes1003");
  EXPECT_EQ(tn.next("Hermes", 5000), "Hermes5000");
  EXPECT_EQ(tn.next("DPD", 1000), "DPD1000");
  std::set<std::string> seen;
  for (int i = 0; i < 500; ++i) ASSERT_TRUE(seen.insert(tn.next("X", 7 + i / 10)).second);
}

TEST(Monitor, Alerts) {
  const Thresholds th;
  const auto alerts = check_point(point(1, 9.3), th);
  ASSERT_EQ(alerts.size(), 1u);
  EXPECT_EQ(alerts[0], (Alert{Channel::temperature, 9.3, 8.0, true, 1}));
  EXPECT_TRUE(check_point(point(1, 8.0), th).empty());
  EXPECT_EQ(check_point(point(1, -0.5), th)[0].above, false);

  auto p = point(2, 4.0);
  p.humidity = 99;
  p.light = 1e6;  // no light bounds by default
  EXPECT_EQ(check_point(p, th).size(), 1u);

  Trace tr;
  for (int i = 0; i < 20; ++i) tr.points.push_back(point(i * 5000, 2.0 + 0.25 * i));
  EXPECT_TRUE(monitor(tr, Thresholds{}).empty());
  tr.points[7].temperature = 9.3;
  EXPECT_EQ(monitor(tr, Thresholds{}).size(), 1u);
}

TEST(Thresholds, JsonRoundTrip) {
  Thresholds t;
  t.light.max = 100;
  t.humidity.min.reset();
  EXPECT_EQ(thresholds_from_value(to_value(t)), t);
  EXPECT_EQ(thresholds_from_value(Value()), Thresholds{});
  EXPECT_EQ(thresholds_from_value(Value{{"temperature", {{"max", 5}}}}).temperature, (Bounds{std::nullopt, 5.0}));
  EXPECT_EQ(code_of([] { thresholds_from_value(Value{{"temperature", {{"min", 5}, {"max", 1}}}}); }),
            Errc::config_error);
}

TEST(Report, ConstantAndSinglePoint) {
  Trace tr;
  for (int i = 0; i < 10; ++i) tr.points.push_back(point(i * 5000, 4.0));
  auto r = generate_report(tr, Thresholds{});
  EXPECT_EQ(r.temperature.mean, 4.0);
  EXPECT_EQ(r.temperature.stddev, 0.0);
  EXPECT_EQ(r.temperature.count, 10u);
  EXPECT_EQ(r.path_km, 0.0);
  EXPECT_EQ(r.duration, Duration{45000});

  Trace one;
  one.points.push_back(point(0, 9.5));
  r = generate_report(one, Thresholds{});
  EXPECT_EQ(r.duration, Duration{0});
  EXPECT_EQ(r.path_km, 0.0);
  EXPECT_EQ(r.average_speed_kmh, 0.0);
  EXPECT_EQ(r.temperature.violations, 1u);
  EXPECT_EQ(code_of([] { generate_report(Trace{}, Thresholds{}); }), Errc::empty_trace);
}

TEST(Report, HandComputed) {
  Trace tr;
  // Due north, 0.1 degree of latitude per hour.
  for (int i = 0; i < 4; ++i) tr.points.push_back(point(i * 3'600'000, 2.0 * i, 52.0 + 0.1 * i, 0.0));
  const auto r = generate_report(tr, Thresholds{});
  EXPECT_DOUBLE_EQ(r.temperature.mean, 3.0);
  EXPECT_DOUBLE_EQ(r.temperature.stddev, std::sqrt(5.0));
  EXPECT_EQ(r.temperature.min, 0.0);
  EXPECT_EQ(r.temperature.max, 6.0);
  const double expect_km = 0.3 * 6371.0 * std::numbers::pi / 180.0;
  EXPECT_NEAR(r.path_km, expect_km, 1e-9);
  EXPECT_NEAR(r.average_speed_kmh, expect_km / 3.0, 1e-9);
  const auto v = to_value(r);
  EXPECT_EQ(v["journey"]["duration_ms"], 3 * 3'600'000);
  EXPECT_EQ(v["channels"]["temperature"]["count"], 4);
}

// Independent oracle: long double accumulation and the vector form of the
// great-circle distance.
TEST(Report, MatchesOracleOnRandomTraces) {
  std::mt19937_64 rng(21);
  for (int round = 0; round < 20; ++round) {
    const auto tr = random_trace(rng, 1000);
    Thresholds th;
    th.light.max = 40.0;
    const auto r = generate_report(tr, th);
    for (const auto c : kChannels) {
      long double sum = 0, mn = 1e300, mx = -1e300;
      std::size_t viol = 0;
      for (const auto& p : tr.points) {
        const long double v = reading(p, c);
        sum += v;
        mn = std::min(mn, v);
        mx = std::max(mx, v);
        const auto& b = th.of(c);
        if ((b.min && v < *b.min) || (b.max && v > *b.max)) ++viol;
      }
      const long double mean = sum / tr.points.size();
      long double ss = 0;
      for (const auto& p : tr.points) ss += (reading(p, c) - mean) * (reading(p, c) - mean);
      const long double sd = std::sqrt(ss / tr.points.size());
      const auto& s = r.of(c);
      EXPECT_NEAR(s.mean, static_cast<double>(mean), 1e-9 * std::abs(static_cast<double>(mean)));
      EXPECT_NEAR(s.stddev, static_cast<double>(sd), 1e-9 * static_cast<double>(sd));
      EXPECT_EQ(s.min, static_cast<double>(mn));
      EXPECT_EQ(s.max, static_cast<double>(mx));
      EXPECT_EQ(s.violations, viol);
    }
    double km = 0;
    for (std::size_t i = 1; i < tr.points.size(); ++i) {
      km += oracle::great_circle_km(tr.points[i - 1].latitude, tr.points[i - 1].longitude, tr.points[i].latitude,
                                    tr.points[i].longitude);
    }
    EXPECT_NEAR(r.path_km, km, 1e-9 * km);
    EXPECT_EQ(r.duration.count(), tr.points.back().t - tr.points.front().t);
  }
}

TEST(Replay, EmitsEveryPointThenDelivers) {
  std::mt19937_64 rng(2);
  const auto tr = random_trace(rng, 100);
  DeliveryReplay replay(job_with(tr));
  EXPECT_FALSE(replay.next_due());
  EXPECT_EQ(code_of([&] { replay.advance(); }), Errc::invalid_state);
  replay.start(50'000);
  EXPECT_EQ(replay.job().status, DeliveryStatus::in_transit);
  EXPECT_EQ(code_of([&] { replay.start(50'000); }), Errc::already_started);
  std::size_t steps = 0;
  while (const auto due = replay.next_due()) {
    EXPECT_EQ(*due, 50'000 + (tr.points[steps].t - tr.points[0].t));
    const auto s = replay.advance();
    EXPECT_EQ(s.index, steps);
    EXPECT_EQ(s.point, tr.points[steps]);
    EXPECT_EQ(s.last, steps == 99);
    ++steps;
  }
  EXPECT_EQ(steps, 100u);
  EXPECT_EQ(replay.job().status, DeliveryStatus::delivered);
  EXPECT_EQ(code_of([&] { replay.start(0); }), Errc::already_started);
  EXPECT_EQ(code_of([] { DeliveryReplay{job_with(Trace{})}; }), Errc::empty_trace);
}

TEST(Replay, FailStopsTheJourney) {
  std::mt19937_64 rng(2);
  DeliveryReplay replay(job_with(random_trace(rng, 10)));
  replay.start(0);
  replay.advance();
  replay.fail();
  EXPECT_EQ(replay.job().status, DeliveryStatus::failed);
  EXPECT_FALSE(replay.next_due());
  EXPECT_EQ(to_value(replay.job())["status"], "failed");
}

// A 500 s journey replayed at 250x should take 2 s of wall time.
TEST(Replay, ScaledClockTiming) {
  Trace tr;
  for (int i = 0; i <= 100; ++i) tr.points.push_back(point(i * 5000, 4.0));
  ScaledClock clock(0, 250.0);
  DeliveryReplay replay(job_with(tr));
  const auto wall_start = std::chrono::steady_clock::now();
  replay.start(clock.now());
  while (const auto due = replay.next_due()) {
    std::this_thread::sleep_for(clock.wall_until(*due));
    replay.advance();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  EXPECT_NEAR(secs, 2.0, 0.2);
}
