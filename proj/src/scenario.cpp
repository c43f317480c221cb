#include "a2sc/scenario.hpp"

#include <chrono>
#include <cmath>
#include <set>
#include <thread>

#include "a2sc/error.hpp"
#include "a2sc/logistics.hpp"

namespace a2sc {

namespace {

Value read_json(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(Errc::config_error, "cannot open " + file.string());
  Value v = Value::parse(in, nullptr, false);
  if (v.is_discarded()) throw Error(Errc::config_error, file.string() + " is not valid JSON");
  return v;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_relative() ? base / path : path;
}

void check_keys(const Value& v, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, _] : v.items()) {
    if (allowed.count(key) == 0) throw Error(Errc::config_error, where + ": unknown field '" + key + "'");
  }
}

ScriptedOrder scripted_order(const Value& v) {
  ScriptedOrder o;
  o.agent = v.value("agent", std::string());
  o.quantity = v.at("quantity").get<double>();
  if (!(o.quantity > 0.0)) throw Error(Errc::config_error, "script quantity must be > 0");
  return o;
}

Agent* first_of_type(const System& system, const std::string& type) {
  for (const auto& name : system.agent_names()) {
    Agent* a = system.find(name);
    if (a != nullptr && a->config().type == type) return a;
  }
  return nullptr;
}

}  // namespace

AgentConfig agent_config_from_value(const Value& v) {
  if (!v.is_object()) throw Error(Errc::config_error, "agent config must be an object");
  check_keys(v, {"name", "type", "skills", "params", "discovery", "services", "seed"}, "agent config");
  try {
    AgentConfig c;
    c.address = local_address(v.at("name").get<std::string>());
    c.type = v.at("type").get<std::string>();
    if (v.contains("skills")) {
      c.skills = v["skills"].get<std::vector<std::string>>();
    } else {
      c.skills = {c.type == "directory" ? "directory" : c.type};
    }
    c.params = v.value("params", Value::object());
    if (v.contains("discovery") && !v["discovery"].is_null()) c.discovery = v["discovery"].get<std::string>();
    if (v.contains("services")) {
      for (const auto& s : v["services"]) c.services.push_back(s);
    }
    c.seed = v.value("seed", std::uint64_t{0});
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::config_error, std::string("agent config: ") + e.what());
  }
}

Scenario load_scenario(const std::filesystem::path& file) {
  const Value v = read_json(file);
  if (!v.is_object()) throw Error(Errc::config_error, "scenario must be a JSON object");
  check_keys(v, {"seed", "origin", "timeouts_ms", "ontologies", "agents", "script"}, "scenario");
  Scenario s;
  s.base_dir = file.parent_path();
  try {
    s.seed = v.value("seed", s.seed);
    if (v.contains("origin")) {
      const auto t = parse_iso8601(v["origin"].get<std::string>());
      if (!t) throw Error(Errc::config_error, "scenario origin is not an ISO 8601 UTC timestamp");
      s.origin = *t;
    }
    if (v.contains("timeouts_ms")) {
      const auto& t = v["timeouts_ms"];
      s.timeouts.cfp = Duration{t.value("cfp", s.timeouts.cfp.count())};
      s.timeouts.request = Duration{t.value("request", s.timeouts.request.count())};
      s.timeouts.award = Duration{t.value("award", s.timeouts.award.count())};
    }
    for (const auto& o : v.value("ontologies", Value::array())) {
      const auto path = resolve(s.base_dir, o.get<std::string>());
      if (!std::filesystem::exists(path)) throw Error(Errc::config_error, "missing ontology " + path.string());
      s.ontologies.push_back(path);
    }
    std::set<std::string> names;
    for (const auto& a : v.value("agents", Value::array())) {
      Value entry = a;
      std::filesystem::path base = s.base_dir;
      if (a.is_string()) {
        const auto path = resolve(s.base_dir, a.get<std::string>());
        entry = read_json(path);
      }
      auto cfg = agent_config_from_value(entry);
      if (!names.insert(cfg.address.name).second) {
        throw Error(Errc::config_error, "duplicate agent name '" + cfg.address.name + "'");
      }
      // Trace files are checked here so a bad path fails before anything starts.
      if (cfg.params.contains("traces")) {
        for (const auto& t : cfg.params["traces"]) {
          const auto path = resolve(base, t.get<std::string>());
          if (!std::filesystem::exists(path)) {
            throw Error(Errc::config_error, cfg.address.name + ": missing trace file " + path.string());
          }
        }
      }
      s.agents.push_back(std::move(cfg));
    }
    if (v.contains("script")) {
      const auto& sc = v["script"];
      if (sc.contains("replenish")) s.script.replenish = scripted_order(sc["replenish"]);
      for (const auto& w : sc.value("wholesale", Value::array())) s.script.wholesale.push_back(scripted_order(w));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::config_error, std::string("scenario: ") + e.what());
  }
  if (s.agents.empty()) throw Error(Errc::config_error, "scenario lists no agents");
  return s;
}

SystemOptions system_options(const Scenario& scenario, ClockSpec clock, std::optional<std::uint64_t> seed) {
  SystemOptions o;
  o.clock = clock;
  o.clock.origin = scenario.origin;
  o.seed = seed.value_or(scenario.seed);
  o.timeouts = scenario.timeouts;
  return o;
}

void boot(System& system, const Scenario& scenario) {
  register_skills(system, scenario.base_dir);
  for (const auto& path : scenario.ontologies) system.ontologies().add(Ontology::load(path));
  for (auto cfg : scenario.agents) {
    cfg.clock = system.options().clock;
    system.spawn(cfg);
  }
}

// -- orders ------------------------------------------------------------------------------

OrderRequest order_request_from_value(const Value& v) {
  if (!v.is_object()) throw Error(Errc::validation_error, "order must be a JSON object");
  try {
    check_keys(v, {"scenario", "product", "quantity", "max_unit_price", "min_performance", "within_km", "agent"},
               "order");
  } catch (const Error& e) {
    throw Error(Errc::validation_error, e.detail());
  }
  try {
    OrderRequest r;
    r.scenario = v.at("scenario").get<std::string>();
    r.product = v.value("product", r.product);
    r.quantity = v.at("quantity").get<double>();
    if (v.contains("max_unit_price")) r.max_unit_price = v["max_unit_price"].get<double>();
    if (v.contains("min_performance")) r.min_performance = v["min_performance"].get<double>();
    if (v.contains("within_km")) {
      const auto& w = v["within_km"];
      r.near = GeoPoint{w.at("lat").get<double>(), w.at("lon").get<double>()};
      r.within_km = w.at("radius_km").get<double>();
    }
    r.agent = v.value("agent", std::string());
    validate(r);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::validation_error, std::string("order: ") + e.what());
  } catch (const Error& e) {
    throw Error(Errc::validation_error, e.detail());
  }
}

void validate(const OrderRequest& r) {
  if (r.scenario != "replenish" && r.scenario != "wholesale") {
    throw Error(Errc::validation_error, "scenario must be replenish or wholesale");
  }
  if (!(r.quantity > 0.0) || !std::isfinite(r.quantity)) throw Error(Errc::validation_error, "quantity must be > 0");
  if (r.max_unit_price && !(*r.max_unit_price >= 0.0)) {
    throw Error(Errc::validation_error, "max_unit_price must be >= 0");
  }
  if (r.min_performance && (*r.min_performance < 0.0 || *r.min_performance > 1.0)) {
    throw Error(Errc::validation_error, "min_performance must be in [0,1]");
  }
  if (r.within_km && (!(*r.within_km > 0.0) || !r.near || !valid(*r.near))) {
    throw Error(Errc::validation_error, "within_km needs a valid point and a radius > 0");
  }
}

std::string place_order(System& system, const OrderRequest& r) {
  validate(r);
  const std::string type = r.scenario == "replenish" ? "wholesaler" : "retailer";
  Agent* agent = r.agent.empty() ? first_of_type(system, type) : system.find(r.agent);
  if (agent == nullptr || !agent->live()) throw Error(Errc::system_not_ready, "no live " + type + " agent");
  auto* trader = agent->skill_as<TraderSkill>();
  if (trader == nullptr || !trader->config().buy) {
    throw Error(Errc::validation_error, agent->name() + " cannot place " + r.scenario + " orders");
  }
  if (r.product != trader->config().product) {
    throw Error(Errc::validation_error, agent->name() + " does not trade " + r.product);
  }
  auto strategy = trader->config().buy->strategy;
  if (r.max_unit_price) strategy.max_price = *r.max_unit_price;
  if (r.min_performance) strategy.min_performance = r.min_performance;
  if (r.within_km) {
    strategy.near = r.near;
    strategy.within_km = r.within_km;
  }
  const auto kind = r.scenario == "replenish" ? "replenish" : "wholesale";
  const auto id = system.processes().open(kind, agent->name(), Value{{"product", r.product}, {"quantity", r.quantity}});
  const double qty = r.quantity;
  system.post(agent->name(), [trader, qty, strategy, id](Agent& a) { trader->launch(a, qty, strategy, id); });
  return id;
}

// -- outputs ---------------------------------------------------------------------------------

Value inventory_state(const System& system) {
  Value agents = Value::object();
  for (const auto& name : system.agent_names()) {
    const Agent* a = system.find(name);
    const auto* t = a != nullptr ? a->skill_as<TraderSkill>() : nullptr;
    if (t == nullptr) continue;
    Value v = to_value(t->inventory());
    v["in_transit_out"] = t->in_transit_out();
    agents[name] = v;
  }
  return Value{{"time", system.now()}, {"agents", agents}};
}

OutputWriter::OutputWriter(System& system, std::filesystem::path dir) : system_(system), dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_ / "reports");
  messages_.open(dir_ / "messages.log", std::ios::binary | std::ios::trunc);
  inventory_.open(dir_ / "inventory.log", std::ios::binary | std::ios::trunc);
  if (!messages_ || !inventory_) throw Error(Errc::config_error, "cannot write to " + dir_.string());
  subscription_ = system_.subscribe([this](const SystemEvent& ev) { on_event(ev); });
}

OutputWriter::~OutputWriter() {
  if (subscription_ != 0) system_.unsubscribe(subscription_);
}

void OutputWriter::on_event(const SystemEvent& ev) {
  if (ev.kind == "envelope" && ev.envelope) {
    std::lock_guard lock(mutex_);
    messages_ << encode(*ev.envelope) << '\n';
  } else if (ev.kind == "inventory") {
    Value line = ev.payload;
    line["t"] = ev.time;
    std::lock_guard lock(mutex_);
    inventory_ << line.dump() << '\n';
  } else if (ev.kind == "report") {
    const auto tracking = ev.payload.value("tracking_number", std::string());
    std::ofstream out(dir_ / "reports" / (tracking + ".report"), std::ios::binary | std::ios::trunc);
    out << ev.payload.dump(2) << '\n';
  } else if (ev.kind == "status" && ev.payload.contains("status") && ev.payload.value("status", "") != "running" &&
             ev.payload.contains("initiator")) {
    write_state();
  }
}

void OutputWriter::write_state() {
  std::ofstream out(dir_ / "inventory.state.json", std::ios::binary | std::ios::trunc);
  out << inventory_state(system_).dump(2) << '\n';
}

void OutputWriter::finish() {
  {
    std::lock_guard lock(mutex_);
    messages_.flush();
    inventory_.flush();
  }
  write_state();
  Value procs = Value::array();
  for (const auto& p : system_.processes().all()) procs.push_back(to_value(p));
  std::ofstream out(dir_ / "processes.json", std::ios::binary | std::ios::trunc);
  out << procs.dump(2) << '\n';
}

// -- headless -----------------------------------------------------------------------------------

namespace {

bool terminal(System& system, const std::vector<std::string>& ids) {
  for (const auto& id : ids) {
    const auto p = system.processes().get(id);
    if (!p || !p->terminal()) return false;
  }
  return true;
}

bool settled(System& system) { return system.processes().all_terminal() && system.idle(); }

bool drive(System& system, const std::function<bool()>& done, Duration wall_timeout) {
  if (system.clock_mode() == ClockMode::virtual_time) {
    system.run_until_idle(done);
    return done();
  }
  return system.await(done, wall_timeout);
}

}  // namespace

RunResult run_script(System& system, const Scenario& scenario, const RunOptions& options) {
  RunResult result;
  const bool replenish = options.script == "replenish" || options.script == "both";
  const bool wholesale = options.script == "wholesale" || options.script == "both";
  if (!replenish && !wholesale) throw Error(Errc::config_error, "unknown script '" + options.script + "'");

  const auto deadline = std::chrono::steady_clock::now() + options.wall_timeout;
  auto remaining = [&] {
    return std::max(Duration{0}, std::chrono::duration_cast<Duration>(deadline - std::chrono::steady_clock::now()));
  };
  bool in_time = true;
  if (replenish) {
    const auto order = scenario.script.replenish.value_or(ScriptedOrder{"", 100.0});
    OrderRequest r;
    r.scenario = "replenish";
    r.quantity = order.quantity;
    r.agent = order.agent;
    const auto id = place_order(system, r);
    in_time = drive(system, [&] { return terminal(system, {id}); }, remaining()) && in_time;
  }
  if (wholesale && in_time) {
    auto orders = scenario.script.wholesale;
    if (orders.empty()) orders.push_back(ScriptedOrder{"", 40.0});
    std::vector<std::string> ids;
    for (const auto& o : orders) {
      OrderRequest r;
      r.scenario = "wholesale";
      r.quantity = o.quantity;
      r.agent = o.agent;
      ids.push_back(place_order(system, r));
    }
    in_time = drive(system, [&] { return terminal(system, ids); }, remaining()) && in_time;
  }
  // Let follow-on work (automatic replenishment, receipts) finish.
  if (in_time) in_time = drive(system, [&] { return settled(system); }, remaining());
  if (system.clock_mode() == ClockMode::virtual_time) system.run_until_idle();

  result.processes = system.processes().all();
  result.ok = in_time && !result.processes.empty() &&
              std::all_of(result.processes.begin(), result.processes.end(),
                          [](const ProcessRecord& p) { return p.status == "fulfilled"; });
  if (!in_time) {
    result.message = "timed out waiting for processes to finish";
  } else if (!result.ok) {
    result.message = "not every process was fulfilled";
  }
  return result;
}

RunResult run_headless(const Scenario& scenario, const RunOptions& options) {
  System system(system_options(scenario, options.clock, options.seed));
  std::optional<OutputWriter> writer;
  if (options.out) writer.emplace(system, *options.out);
  boot(system, scenario);
  auto result = run_script(system, scenario, options);
  system.stop();
  if (writer) writer->finish();
  return result;
}

}  // namespace a2sc
