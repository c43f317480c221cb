// a2sc: run the meat supply chain scenario, synthesize traces, report on a trace.

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "a2sc/error.hpp"
#include "a2sc/gateway.hpp"
#include "a2sc/http_server.hpp"
#include "a2sc/logistics.hpp"
#include "a2sc/scenario.hpp"

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

a2sc::GeoPoint parse_point(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw a2sc::Error(a2sc::Errc::config_error, "expected lat,lon: " + text);
  const a2sc::GeoPoint p{std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1))};
  if (!a2sc::valid(p)) throw a2sc::Error(a2sc::Errc::config_error, "coordinates out of range: " + text);
  return p;
}

void print_processes(const std::vector<a2sc::ProcessRecord>& processes) {
  for (const auto& p : processes) {
    std::cout << p.id << ' ' << p.kind << ' ' << p.initiator << ' ' << p.status;
    if (!p.outcome.empty() && p.outcome != p.status) std::cout << " (" << p.outcome << ')';
    std::cout << '\n';
  }
}

int serve(const a2sc::Scenario& scenario, a2sc::ClockSpec clock, std::optional<std::uint64_t> seed,
          const std::string& listen, std::uint16_t port, const std::optional<std::string>& out) {
  a2sc::System system(a2sc::system_options(scenario, clock, seed));
  std::optional<a2sc::OutputWriter> writer;
  if (out) writer.emplace(system, *out);
  a2sc::boot(system, scenario);
  a2sc::Gateway gateway(system);
  a2sc::HttpServer server(gateway, listen, port);
  server.start();
  std::cout << "gateway listening on http://" << listen << ':' << server.port() << " (Ctrl-C to stop)" << std::endl;
  while (!g_interrupted.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  system.stop();
  if (writer) writer->finish();
  print_processes(system.processes().all());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent meat supply chain simulator"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Boot the agents and the gateway, optionally running a scripted scenario");
  std::string config = "data/scenario.json";
  std::string script = "both";
  double speed = 50.0;
  std::optional<std::uint64_t> seed;
  bool headless = false;
  std::optional<std::string> out;
  std::string clock_name = "scaled";
  std::string listen = "127.0.0.1";
  std::uint16_t port = 8080;
  double timeout_s = 300.0;
  run->add_option("--config", config, "Scenario file")->capture_default_str();
  run->add_option("--scenario", script, "Scripted processes for --headless")
      ->check(CLI::IsMember({"replenish", "wholesale", "both"}))
      ->capture_default_str();
  run->add_option("--speed", speed, "Clock speed factor (scaled clock)")->check(CLI::PositiveNumber)->capture_default_str();
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_flag("--headless", headless, "Run the script without the gateway and exit");
  run->add_option("--out", out, "Output directory for logs and reports");
  run->add_option("--clock", clock_name, "Clock mode")
      ->check(CLI::IsMember({"virtual", "scaled", "real"}))
      ->capture_default_str();
  run->add_option("--listen", listen, "Gateway address")->capture_default_str();
  run->add_option("--port", port, "Gateway port (0 = any free port)")->capture_default_str();
  run->add_option("--timeout", timeout_s, "Wall-clock limit for a headless run, seconds")->capture_default_str();

  auto* synth = app.add_subcommand("synth-trace", "Write a synthetic delivery trace CSV");
  std::string from = "52.2053,0.1218";
  std::string to = "52.1889,0.1507";
  double mps = 8.0;
  std::uint64_t trace_seed = 1;
  std::string start = "2020-07-13T18:48:20.000Z";
  std::string trace_out;
  double temp = 4.0;
  synth->add_option("--from", from, "Start point lat,lon")->capture_default_str();
  synth->add_option("--to", to, "End point lat,lon")->capture_default_str();
  synth->add_option("--speed-mps", mps, "Travel speed, m/s")->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--seed", trace_seed, "Noise seed")->capture_default_str();
  synth->add_option("--start", start, "First timestamp, ISO 8601 UTC")->capture_default_str();
  synth->add_option("--temperature", temp, "Mean temperature, degC")->capture_default_str();
  synth->add_option("--out", trace_out, "Output CSV (default stdout)");

  auto* report = app.add_subcommand("report", "Print the summary report of a trace CSV");
  std::string report_trace;
  std::string thresholds_file;
  report->add_option("trace", report_trace, "Trace CSV")->required()->check(CLI::ExistingFile);
  report->add_option("--thresholds", thresholds_file, "JSON thresholds file")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto scenario = a2sc::load_scenario(config);
      a2sc::ClockSpec clock;
      clock.mode = clock_name == "virtual" ? a2sc::ClockMode::virtual_time
                   : clock_name == "real"  ? a2sc::ClockMode::real
                                           : a2sc::ClockMode::scaled;
      clock.factor = clock.mode == a2sc::ClockMode::scaled ? speed : 1.0;
      if (!headless) {
        if (clock.mode == a2sc::ClockMode::virtual_time) {
          throw a2sc::Error(a2sc::Errc::config_error, "the virtual clock is only available with --headless");
        }
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        return serve(scenario, clock, seed, listen, port, out);
      }
      a2sc::RunOptions options;
      options.script = script;
      options.clock = clock;
      options.seed = seed;
      if (out) options.out = *out;
      options.wall_timeout = std::chrono::milliseconds(static_cast<std::int64_t>(timeout_s * 1000.0));
      const auto result = a2sc::run_headless(scenario, options);
      print_processes(result.processes);
      if (!result.ok) {
        std::cerr << "scenario-failure: " << result.message << '\n';
        return 1;
      }
      return 0;
    }
    if (*synth) {
      a2sc::SynthOptions o;
      o.from = parse_point(from);
      o.to = parse_point(to);
      o.speed_mps = mps;
      o.seed = trace_seed;
      o.temperature = temp;
      const auto t = a2sc::parse_iso8601(start);
      if (!t) throw a2sc::Error(a2sc::Errc::config_error, "bad --start timestamp");
      o.start = *t;
      const auto trace = a2sc::synth_trace(o);
      if (trace_out.empty()) {
        a2sc::write_trace(std::cout, trace);
      } else {
        std::ofstream f(trace_out, std::ios::binary);
        if (!f) throw a2sc::Error(a2sc::Errc::config_error, "cannot write " + trace_out);
        a2sc::write_trace(f, trace);
      }
      return 0;
    }
    if (*report) {
      const auto trace = a2sc::load_trace(report_trace);
      a2sc::Thresholds th;
      if (!thresholds_file.empty()) {
        std::ifstream f(thresholds_file);
        const auto v = a2sc::Value::parse(f, nullptr, false);
        if (v.is_discarded()) throw a2sc::Error(a2sc::Errc::config_error, thresholds_file + " is not JSON");
        th = a2sc::thresholds_from_value(v);
      }
      for (const auto& w : trace.warnings) std::cerr << "warning: " << w << '\n';
      auto v = a2sc::to_value(a2sc::generate_report(trace, th));
      v["alerts"] = a2sc::monitor(trace, th).size();
      std::cout << v.dump(2) << '\n';
      return 0;
    }
  } catch (const a2sc::Error& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }
  return 0;
}
