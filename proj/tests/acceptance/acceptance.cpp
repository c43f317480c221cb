// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any
// fails. Usage: acceptance <path to a2sc binary>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>

#include "a2sc/agents.hpp"
#include "a2sc/error.hpp"
#include "a2sc/logistics.hpp"
#include "a2sc/messaging.hpp"
#include "a2sc/scenario.hpp"
#include "support/cn_sim.hpp"
#include "support/matchmaking.hpp"

using namespace a2sc;
namespace fs = std::filesystem;

namespace {

const fs::path kData = A2SC_DATA_DIR;

struct Outcome {
  bool ok = true;
  std::string detail;

  void fail(const std::string& why) {
    if (ok) detail = why;
    ok = false;
  }
};

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("a2sc-acceptance-" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p.parent_path());
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<Envelope> read_log(const fs::path& file) {
  std::vector<Envelope> out;
  std::ifstream in(file, std::ios::binary);
  std::string line;
  while (std::getline(in, line)) out.push_back(decode(line));
  return out;
}

// -- 1 ---------------------------------------------------------------------------------

Outcome showcase(const std::string& cli) {
  Outcome o;
  const auto out = scratch("showcase");
  const std::string cmd = "\"" + cli + "\" run --config \"" + (kData / "scenario.json").string() +
                          "\" --scenario both --headless --speed 50 --clock scaled --out \"" + out.string() +
                          "\" > \"" + out.string() + ".stdout\" 2>&1";
  const auto start = std::chrono::steady_clock::now();
  const int status = std::system(cmd.c_str());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (status != 0) {
    o.fail("exit status " + std::to_string(status) + ": " + slurp(out.string() + ".stdout"));
    return o;
  }
  if (secs >= 60.0) o.fail("took " + std::to_string(secs) + " s");

  const auto log = read_log(out / "messages.log");
  std::map<std::string, std::vector<const Envelope*>> by_process;
  for (const auto& e : log) {
    if (e.protocol != kContractNet) continue;
    by_process[e.content.value("order_id", std::string("?"))].push_back(&e);
  }
  const auto procs = Value::parse(slurp(out / "processes.json"));
  if (procs.size() < 2) o.fail("expected both scripted processes, got " + std::to_string(procs.size()));
  for (const auto& p : procs) {
    const auto id = p["id"].get<std::string>();
    const auto& msgs = by_process[id];
    bool cfp_seen = false;
    int accepts = 0;
    bool delivered = false;
    for (const auto* e : msgs) {
      const auto act = e->performative.act;
      if (act == Act::cfp) cfp_seen = true;
      if (act == Act::propose && !cfp_seen) o.fail(id + ": propose before cfp");
      if (act == Act::accept_proposal) ++accepts;
      if (act == Act::inform && e->content.value("type", "") == "delivery-notification" &&
          e->content.value("status", "") == "delivered") {
        delivered = true;
      }
    }
    if (accepts != 1) o.fail(id + ": " + std::to_string(accepts) + " accept-proposal messages");
    if (!delivered) o.fail(id + ": no delivered inform");
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f s wall, %zu messages", secs, log.size());
  if (o.ok) o.detail = buf;
  return o;
}

// -- 2 ---------------------------------------------------------------------------------

Outcome contract_net() {
  Outcome o;
  std::mt19937_64 rng(1000);
  int awarded = 0;
  for (int i = 0; i < 1000 && o.ok; ++i) {
    const auto run = sim::run_contract_net(rng, 10, false);
    const bool any_proposal = std::any_of(run.behaviour.begin(), run.behaviour.end(), [](auto b) {
      return b != sim::Behaviour::refuse && b != sim::Behaviour::silent;
    });
    const int expected = any_proposal ? 1 : 0;
    if (run.accepts != expected) {
      o.fail("run " + std::to_string(i) + ": " + std::to_string(run.accepts) + " awards, expected " +
             std::to_string(expected));
    }
    if (!run.absorbed) o.fail("run " + std::to_string(i) + ": a terminal dialogue changed state");
    if (run.violations != 0) o.fail("run " + std::to_string(i) + ": " + run.problems.front());
    awarded += run.accepts;
  }
  if (o.ok) o.detail = "1000 runs, " + std::to_string(awarded) + " with an award";
  return o;
}

// -- 3 ---------------------------------------------------------------------------------

Outcome matchmaking() {
  Outcome o;
  std::mt19937_64 rng(3);
  Registry registry;
  std::vector<ServiceDescription> all;
  for (int i = 0; i < 1000; ++i) {
    auto d = oracle::random_description(rng, i);
    d.id = registry.register_service(d);
    all.push_back(d);
  }
  std::size_t hits = 0;
  for (int k = 0; k < 200 && o.ok; ++k) {
    const auto q = oracle::random_query(rng, all);
    std::set<std::string> got;
    for (const auto& d : registry.search(q)) got.insert(d.id);
    const auto want = oracle::linear_scan(all, q);
    if (got != want) o.fail("query " + to_value(q).dump() + " differs from the linear scan");
    hits += got.size();
  }
  if (o.ok) o.detail = "200 queries, " + std::to_string(hits) + " matches";
  return o;
}

// -- 4, 5 ------------------------------------------------------------------------------

struct Booted {
  explicit Booted(const Scenario& s, std::uint64_t seed)
      : system(system_options(s, ClockSpec{ClockMode::virtual_time}, seed)) {
    boot(system, s);
    system.run_until_idle();
  }

  TraderSkill* trader(const std::string& name) const {
    const Agent* a = system.find(name);
    return a != nullptr ? a->skill_as<TraderSkill>() : nullptr;
  }

  std::string order(const std::string& kind, double qty, const std::string& agent) {
    OrderRequest r;
    r.scenario = kind;
    r.quantity = qty;
    r.agent = agent;
    return place_order(system, r);
  }

  System system;
};

Outcome conservation() {
  Outcome o;
  auto scenario = load_scenario(kData / "scenario.json");
  std::mt19937_64 rng(4);
  std::size_t fulfilled = 0;
  for (int seq = 0; seq < 500 && o.ok; ++seq) {
    for (auto& a : scenario.agents) {
      if (a.address.name == "wholesaler") a.params["stock"] = static_cast<double>(rng() % 120);
    }
    Booted b(scenario, seq + 1);
    std::vector<TraderSkill*> traders;
    double supplier_initial = 0.0;
    for (const auto& name : b.system.agent_names()) {
      if (auto* t = b.trader(name)) traders.push_back(t);
    }
    supplier_initial = b.trader("supplier")->inventory().on_hand;
    auto total_on_hand = [&] {
      double sum = 0.0;
      for (const auto* t : traders) sum += t->inventory().on_hand;
      return sum;
    };
    auto in_transit = [&] {
      double sum = 0.0;
      for (const auto* t : traders) sum += t->in_transit_out();
      return sum;
    };
    const double initial = total_on_hand();
    bool negative = false;
    const auto watch = b.system.subscribe([&](const SystemEvent& ev) {
      if (ev.kind == "inventory" && ev.payload.value("on_hand", 0.0) < 0.0) negative = true;
    });

    const int orders = 1 + static_cast<int>(rng() % 5);
    for (int i = 0; i < orders; ++i) {
      const bool replenish = rng() % 3 == 0;
      const double qty = 1.0 + static_cast<double>(rng() % 80);
      b.order(replenish ? "replenish" : "wholesale", qty,
              replenish ? "wholesaler" : (rng() % 2 == 0 ? "retailer-1" : "retailer-2"));
      b.system.run_until(b.system.now() + static_cast<Timestamp>(rng() % 900'000));
      if (std::abs(total_on_hand() + in_transit() - initial) > 1e-9) {
        o.fail("sequence " + std::to_string(seq) + ": goods appeared or vanished mid-run");
      }
    }
    b.system.run_until_idle();
    b.system.unsubscribe(watch);
    if (negative) o.fail("sequence " + std::to_string(seq) + ": negative stock");
    if (in_transit() != 0.0) o.fail("sequence " + std::to_string(seq) + ": goods still in transit at rest");
    // With nothing in transit the only change is what left the supplier and
    // arrived elsewhere, so the total is unchanged and the supplier drew down.
    if (std::abs(total_on_hand() - initial) > 1e-9) o.fail("sequence " + std::to_string(seq) + ": total changed");
    if (b.trader("supplier")->inventory().on_hand > supplier_initial) o.fail("supplier stock grew");
    for (const auto* t : traders) {
      if (t->inventory().on_hand < 0.0) o.fail("negative stock at rest");
    }
    for (const auto& p : b.system.processes().all()) fulfilled += p.status == "fulfilled";
  }
  if (o.ok) o.detail = "500 sequences, " + std::to_string(fulfilled) + " fulfilled orders";
  return o;
}

Outcome replenishment() {
  Outcome o;
  auto scenario = load_scenario(kData / "scenario.json");
  for (auto& a : scenario.agents) {
    if (a.address.name == "wholesaler") a.params["stock"] = 100;
  }
  Booted b(scenario, 42);
  auto count_replenish = [&] {
    int n = 0;
    for (const auto& p : b.system.processes().all()) n += p.kind == "replenish";
    return n;
  };
  // 100 - 70 = 30 stays above the reorder point of 20.
  b.order("wholesale", 70, "retailer-1");
  b.system.run_until_idle();
  if (count_replenish() != 0) o.fail("replenished above the reorder point");
  // 30 - 12 = 18 is at or below it: exactly one replenishment opens.
  b.order("wholesale", 12, "retailer-2");
  b.system.run_until_idle([&] { return count_replenish() > 0; });
  if (count_replenish() != 1) o.fail("expected one replenishment, saw " + std::to_string(count_replenish()));
  if (!b.trader("wholesaler")->replenishment_in_flight()) o.fail("replenishment not in flight");
  // Further sales while it is in flight open nothing new.
  b.order("wholesale", 10, "retailer-1");
  b.order("wholesale", 5, "retailer-2");
  b.system.run_until_idle([&] {
    return !b.trader("wholesaler")->replenishment_in_flight() || count_replenish() > 1;
  });
  if (count_replenish() != 1) o.fail("a second replenishment opened while one was in flight");
  b.system.run_until_idle();
  for (const auto& p : b.system.processes().all()) {
    if (p.status != "fulfilled") o.fail(p.id + " ended " + p.outcome);
  }
  if (o.ok) {
    o.detail = "wholesaler ends at " + std::to_string(static_cast<int>(b.trader("wholesaler")->inventory().on_hand));
  }
  return o;
}

// -- 6 ---------------------------------------------------------------------------------

Outcome report_oracle() {
  Outcome o;
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<std::size_t> length(2, 2000);
  std::uniform_real_distribution<double> temp(-3.0, 12.0), hum(10.0, 100.0), light(0.0, 80.0), step(-0.01, 0.01);
  auto close = [](double got, long double want) {
    const long double scale = std::max<long double>(1.0L, std::fabs(want));
    return std::fabs(static_cast<long double>(got) - want) <= 1e-9L * scale;
  };
  for (int i = 0; i < 100 && o.ok; ++i) {
    Trace tr;
    Timestamp t = 1594666100000;
    double lat = 52.2, lon = 0.12;
    const auto n = length(rng);
    for (std::size_t k = 0; k < n; ++k) {
      t += 1 + static_cast<Timestamp>(rng() % 20000);
      lat += step(rng);
      lon += step(rng);
      tr.points.push_back(TracePoint{t, lat, lon, 10.0, temp(rng), hum(rng), light(rng)});
    }
    Thresholds th;
    if (rng() % 2 == 0) th.light.max = 60.0;
    const auto r = generate_report(tr, th);
    const auto alerts = monitor(tr, th);
    for (const auto c : kChannels) {
      long double sum = 0, mn = 1e300, mx = -1e300;
      for (const auto& p : tr.points) {
        const long double v = reading(p, c);
        sum += v;
        mn = std::min(mn, v);
        mx = std::max(mx, v);
      }
      const long double mean = sum / n;
      long double ss = 0;
      for (const auto& p : tr.points) ss += (reading(p, c) - mean) * (reading(p, c) - mean);
      const long double sd = std::sqrt(ss / n);
      const auto& s = r.of(c);
      const auto name = std::string(to_string(c));
      if (!close(s.mean, mean)) o.fail("trace " + std::to_string(i) + " " + name + " mean");
      if (!close(s.stddev, sd)) o.fail("trace " + std::to_string(i) + " " + name + " stddev");
      if (!close(s.min, mn) || !close(s.max, mx)) o.fail("trace " + std::to_string(i) + " " + name + " range");
      const auto alert_count = static_cast<std::size_t>(
          std::count_if(alerts.begin(), alerts.end(), [&](const Alert& a) { return a.channel == c; }));
      if (s.violations != alert_count) o.fail("trace " + std::to_string(i) + " " + name + " violations");
    }
    long double km = 0;
    for (std::size_t k = 1; k < n; ++k) {
      km += oracle::great_circle_km(tr.points[k - 1].latitude, tr.points[k - 1].longitude, tr.points[k].latitude,
                                    tr.points[k].longitude);
    }
    if (!close(r.path_km, km)) o.fail("trace " + std::to_string(i) + " path");
    const long double hours = static_cast<long double>(tr.points.back().t - tr.points.front().t) / 3.6e6L;
    if (!close(r.average_speed_kmh, km / hours)) o.fail("trace " + std::to_string(i) + " speed");
  }
  if (o.ok) o.detail = "100 traces";
  return o;
}

// -- 7 ---------------------------------------------------------------------------------

Outcome determinism() {
  Outcome o;
  const auto scenario = load_scenario(kData / "scenario.json");
  RunOptions opts;
  opts.clock = ClockSpec{ClockMode::virtual_time};
  opts.seed = 7;
  const auto a = scratch("determinism-a");
  const auto b = scratch("determinism-b");
  opts.out = a;
  if (!run_headless(scenario, opts).ok) o.fail("first run failed");
  opts.out = b;
  if (!run_headless(scenario, opts).ok) o.fail("second run failed");
  const auto la = slurp(a / "messages.log");
  const auto lb = slurp(b / "messages.log");
  if (la.empty()) o.fail("empty message log");
  if (la != lb) o.fail("message logs differ");
  if (o.ok) o.detail = std::to_string(la.size()) + " identical bytes";
  return o;
}

// -- 8 ---------------------------------------------------------------------------------

Value random_value(std::mt19937_64& rng, int depth) {
  static const std::vector<std::string> words{"beef", "P1", "\xc3\xa9t\xc3\xa9", "a\"b", "line\nbreak", "", "{}", "tab\t"};
  switch (rng() % (depth > 2 ? 4 : 6)) {
    case 0: return words[rng() % words.size()];
    case 1: return static_cast<std::int64_t>(rng() % 2'000'000) - 1'000'000;
    case 2: return static_cast<double>(rng() % 100000) / 7.0;
    case 3: return rng() % 2 == 0;
    case 4: {
      Value arr = Value::array();
      for (int i = 0; i < static_cast<int>(rng() % 4); ++i) arr.push_back(random_value(rng, depth + 1));
      return arr;
    }
    default: {
      Value obj = Value::object();
      for (int i = 0; i < static_cast<int>(rng() % 4); ++i) {
        obj[words[rng() % words.size()] + "k"] = random_value(rng, depth + 1);
      }
      return obj;
    }
  }
}

Envelope random_envelope(std::mt19937_64& rng) {
  static const std::vector<std::string> names{"supplier", "wholesaler", "retailer-1", "Hermes", "DPD", "oef", "x y"};
  static const std::vector<std::string> ontologies{"meat-trade", "logistics", "admin", "oef", ""};
  const bool cn = rng() % 2 == 0;
  const std::vector<Performative> cn_acts{Performative::cfp(),    Performative::propose(),
                                          Performative::accept_proposal(), Performative::reject_proposal(),
                                          Performative::refuse(), Performative::inform(), Performative::failure()};
  const std::vector<Performative> rr_acts{Performative::get(), Performative::post(), Performative::response()};
  const auto& acts = cn ? cn_acts : rr_acts;
  Value content = Value::object();
  content["type"] = "t" + std::to_string(rng() % 10);
  for (int i = 0; i < static_cast<int>(rng() % 4); ++i) content["f" + std::to_string(i)] = random_value(rng, 0);
  auto e = make_envelope(local_address(names[rng() % names.size()]), local_address(names[rng() % names.size()]),
                         std::string(cn ? kContractNet : kRequestResponse), ontologies[rng() % ontologies.size()],
                         names[rng() % names.size()] + "/" + std::to_string(rng() % 1000), acts[rng() % acts.size()],
                         content, static_cast<Timestamp>(rng() % 4'000'000'000'000ULL));
  if (rng() % 3 == 0) e.reply_with = "r" + std::to_string(rng() % 100);
  if (rng() % 3 == 0) e.in_reply_to = "r" + std::to_string(rng() % 100);
  return e;
}

Outcome codec() {
  Outcome o;
  std::mt19937_64 rng(8);
  std::size_t accepted_mutants = 0;
  for (int i = 0; i < 10000 && o.ok; ++i) {
    const auto e = random_envelope(rng);
    const auto bytes = encode(e);
    Envelope back;
    try {
      back = decode(bytes);
    } catch (const Error& err) {
      o.fail("envelope " + std::to_string(i) + " did not decode: " + err.what());
      break;
    }
    if (!(back == e) || encode(back) != bytes) o.fail("envelope " + std::to_string(i) + " changed in round trip");

    // Single-byte mutation: either rejected or a valid envelope.
    std::string mutant = bytes;
    const auto pos = rng() % mutant.size();
    char c = static_cast<char>(rng() % 256);
    if (c == mutant[pos]) c = static_cast<char>(c ^ 1);
    mutant[pos] = c;
    try {
      const auto m = decode(mutant);
      ++accepted_mutants;
      validate(m);
      if (!(decode(encode(m)) == m)) o.fail("accepted mutant does not round-trip");
    } catch (const Error& err) {
      if (err.code() != Errc::malformed_encoding) {
        o.fail("mutant raised " + std::string(to_string(err.code())) + " instead of malformed-encoding");
      }
    }
  }
  if (o.ok) o.detail = "10000 envelopes, " + std::to_string(accepted_mutants) + " mutants decoded valid";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <a2sc binary>\n";
    return 2;
  }
  const std::string cli = argv[1];
  const std::vector<std::pair<std::string, std::function<Outcome()>>> checks{
      {"seven-agent showcase", [&] { return showcase(cli); }},
      {"contract-net properties", contract_net},
      {"matchmaking oracle", matchmaking},
      {"inventory conservation", conservation},
      {"automatic replenishment trigger", replenishment},
      {"report oracle", report_oracle},
      {"determinism", determinism},
      {"envelope codec", codec},
  };
  int failed = 0;
  for (const auto& [name, check] : checks) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    std::cout << (o.ok ? "PASS " : "FAIL ") << name << (o.detail.empty() ? "" : " (" + o.detail + ")") << std::endl;
    failed += o.ok ? 0 : 1;
  }
  fs::remove_all(fs::temp_directory_path() / ("a2sc-acceptance-" + std::to_string(::getpid())));
  return failed == 0 ? 0 : 1;
}
