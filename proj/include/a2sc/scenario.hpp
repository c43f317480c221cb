#pragma once

// Scenario files, system bring-up, order placement and the headless runner.
//
// A scenario is a JSON document:
//
//   {
//     "seed": 42,
//     "origin": "2020-07-13T18:48:20.000Z",
//     "timeouts_ms": {"cfp": 60000, "request": 30000, "award": 60000},
//     "ontologies": ["ontologies/meat-trade.json", ...],
//     "agents": ["agents/oef.json", {...inline agent...}, ...],
//     "script": {"replenish": {"quantity": 100},
//                "wholesale": [{"agent": "retailer-1", "quantity": 40}, ...]}
//   }
//
// Agents are spawned in the listed order, so the directory comes first and
// each agent's counterparts come before it. Relative paths resolve against
// the scenario file's directory.

#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "a2sc/agents.hpp"
#include "a2sc/runtime.hpp"

namespace a2sc {

struct ScriptedOrder {
  std::string agent;  // empty = first agent of the initiating type
  double quantity = 0.0;
};

struct Script {
  std::optional<ScriptedOrder> replenish;
  std::vector<ScriptedOrder> wholesale;
};

struct Scenario {
  std::filesystem::path base_dir;
  std::uint64_t seed = 42;
  Timestamp origin = 1594666100000;
  Timeouts timeouts{Duration{60'000}, Duration{30'000}, Duration{60'000}};
  std::vector<std::filesystem::path> ontologies;
  std::vector<AgentConfig> agents;
  Script script;
};

AgentConfig agent_config_from_value(const Value& v);

/// Throws Error{config_error}: unreadable files, unknown fields, duplicate
/// names, missing trace files.
Scenario load_scenario(const std::filesystem::path& file);

/// Registers skills and ontologies and spawns every agent. The scenario's
/// clock mode and seed are overridden by `clock` and `seed`.
void boot(System& system, const Scenario& scenario);
SystemOptions system_options(const Scenario& scenario, ClockSpec clock, std::optional<std::uint64_t> seed);

// -- orders --------------------------------------------------------------------------

struct OrderRequest {
  std::string scenario;  // replenish | wholesale
  std::string product = "beef";
  double quantity = 0.0;
  std::optional<double> max_unit_price;
  std::optional<double> min_performance;
  std::optional<GeoPoint> near;
  std::optional<double> within_km;
  std::string agent;  // initiating agent; empty = default for the scenario
};

/// Throws Error{validation_error}.
OrderRequest order_request_from_value(const Value& v);
void validate(const OrderRequest& r);

/// Injects the order into the initiating agent and returns the process id.
/// Throws Error{validation_error} or Error{system_not_ready}.
std::string place_order(System& system, const OrderRequest& r);

// -- outputs --------------------------------------------------------------------------

/// Writes the run artefacts under one directory:
///   messages.log           one encoded envelope per line, routing order
///   inventory.log          one JSON object per inventory movement
///   reports/<tracking>.report
///   inventory.state.json   rewritten whenever a process closes and at finish
///   processes.json         written at finish
class OutputWriter {
 public:
  OutputWriter(System& system, std::filesystem::path dir);
  ~OutputWriter();

  OutputWriter(const OutputWriter&) = delete;
  OutputWriter& operator=(const OutputWriter&) = delete;

  void finish();
  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  void on_event(const SystemEvent& ev);
  void write_state();

  System& system_;
  std::filesystem::path dir_;
  std::size_t subscription_ = 0;
  std::mutex mutex_;
  std::ofstream messages_;
  std::ofstream inventory_;
};

/// Snapshot of every trader's inventory plus goods dispatched but not yet
/// receipted.
Value inventory_state(const System& system);

// -- headless runs ------------------------------------------------------------------------

struct RunOptions {
  std::string script = "both";  // replenish | wholesale | both
  ClockSpec clock{ClockMode::scaled, 50.0};
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  Duration wall_timeout{120'000};  // threaded clocks only
};

struct RunResult {
  bool ok = false;  // every process fulfilled
  std::vector<ProcessRecord> processes;
  std::string message;
};

/// Runs the scripted orders to completion on an already booted system.
RunResult run_script(System& system, const Scenario& scenario, const RunOptions& options);

/// Loads nothing: boots `scenario`, runs the script, writes outputs.
RunResult run_headless(const Scenario& scenario, const RunOptions& options);

}  // namespace a2sc
