#include <gtest/gtest.h>

#include <thread>

#include "a2sc/agents.hpp"
#include "a2sc/error.hpp"
#include "a2sc/gateway.hpp"
#include "a2sc/scenario.hpp"

using namespace a2sc;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return Errc::config_error;
}

Envelope sample_envelope() {
  Envelope e;
  e.sender = local_address("wholesaler");
  e.receiver = local_address("supplier");
  e.performative = Performative::cfp();
  e.protocol = std::string(kContractNet);
  e.conversation = "wholesaler/1";
  e.ontology = "meat-trade";
  e.content = Value{{"type", "purchase-order"}, {"quantity", 100}};
  e.timestamp = 1594666100000;
  return e;
}

struct Booted {
  Booted()
      : scenario(load_scenario(std::filesystem::path(A2SC_DATA_DIR) / "scenario.json")),
        system(system_options(scenario, ClockSpec{ClockMode::virtual_time}, std::nullopt)),
        gateway(system, 8) {
    boot(system, scenario);
    system.run_until_idle();
  }

  Scenario scenario;
  System system;
  Gateway gateway;
};

}  // namespace

TEST(Frames, EnvelopeBecomesChat) {
  SystemEvent ev;
  ev.kind = "envelope";
  ev.envelope = sample_envelope();
  const auto f = frame_for(ev);
  ASSERT_TRUE(f);
  EXPECT_EQ(f->kind, "chat");
  const Value expected{{"sender", "wholesaler"},   {"recipient", "supplier"},   {"performative", "cfp"},
                       {"body", ev.envelope->content}, {"conversation", "wholesaler/1"},
                       {"protocol", "contract-net"}, {"ontology", "meat-trade"}, {"timestamp", 1594666100000}};
  EXPECT_EQ(f->payload, expected);
}

TEST(Frames, KindMapping) {
  auto kind_of = [](const std::string& k) {
    SystemEvent ev;
    ev.kind = k;
    ev.payload = Value{{"x", 1}};
    ev.time = 7;
    const auto f = frame_for(ev);
    return f ? f->kind + "/" + f->payload.value("kind", std::string()) : std::string("-");
  };
  EXPECT_EQ(kind_of("location"), "location/");
  EXPECT_EQ(kind_of("sensor"), "sensor/");
  EXPECT_EQ(kind_of("report"), "report/");
  EXPECT_EQ(kind_of("notification"), "notification/");
  EXPECT_EQ(kind_of("inventory"), "status/inventory");
  EXPECT_EQ(kind_of("alert"), "notification/alert");
  EXPECT_EQ(kind_of("violation"), "notification/violation");
  EXPECT_EQ(kind_of("orphan"), "notification/orphan");
  EXPECT_EQ(kind_of("process"), "-");
  EXPECT_EQ(kind_of("envelope"), "-");  // no envelope attached

  SystemEvent ev;
  ev.kind = "sensor";
  ev.time = 99;
  EXPECT_EQ(frame_for(ev)->payload["time"], 99);
  EXPECT_EQ(to_value(PushFrame{3, "chat", Value::object()}),
            (Value{{"seq", 3}, {"kind", "chat"}, {"payload", Value::object()}}));
}

TEST(Frames, ParseKinds) {
  EXPECT_TRUE(parse_kinds("").empty());
  EXPECT_EQ(parse_kinds("chat,sensor"), (std::set<std::string>{"chat", "sensor"}));
  EXPECT_EQ(parse_kinds("chat,,chat"), (std::set<std::string>{"chat"}));
  EXPECT_EQ(code_of([] { parse_kinds("chat,gossip"); }), Errc::validation_error);
}

TEST(Subscription, DropsWhenFullAndLeavesSeqGaps) {
  Subscription s({}, 3);
  for (int i = 0; i < 5; ++i) s.push(PushFrame{0, "chat", Value{{"i", i}}});
  EXPECT_EQ(s.dropped(), 2u);
  auto got = s.drain();
  ASSERT_EQ(got.size(), 3u);
  EXPECT_EQ(got[2].seq, 3u);
  s.push(PushFrame{0, "chat", {}});
  got = s.drain();
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].seq, 6u);  // 4 and 5 were dropped
}

TEST(Subscription, FiltersAndWakes) {
  Subscription s({"sensor"}, 10);
  EXPECT_TRUE(s.wants("sensor"));
  EXPECT_FALSE(s.wants("chat"));
  EXPECT_FALSE(s.pop(std::chrono::milliseconds(10)));
  std::jthread producer([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    s.push(PushFrame{0, "sensor", {}});
  });
  const auto f = s.pop(std::chrono::seconds(5));
  ASSERT_TRUE(f);
  EXPECT_EQ(f->seq, 1u);
  s.close();
  EXPECT_TRUE(s.closed());
  s.push(PushFrame{0, "sensor", {}});
  EXPECT_FALSE(s.pop(std::chrono::milliseconds(1)));
}

TEST(Gateway, SlowSubscriberDoesNotStallOthers) {
  Booted b;
  auto slow = b.gateway.subscribe({"chat"});
  auto fast = b.gateway.subscribe({"chat"});
  const auto reply = b.gateway.handle("POST", "/orders", R"({"scenario":"replenish","quantity":100})");
  ASSERT_EQ(reply.status, 202);
  // The fast client reads after every event; listeners run in subscription
  // order, so this one runs right after the gateway's push.
  std::vector<PushFrame> fast_frames;
  const auto reader = b.system.subscribe([&](const SystemEvent&) {
    for (auto& f : fast->drain()) fast_frames.push_back(std::move(f));
  });
  b.system.run_until_idle();
  b.system.unsubscribe(reader);
  EXPECT_EQ(fast->dropped(), 0u);
  ASSERT_FALSE(fast_frames.empty());
  for (std::size_t i = 0; i < fast_frames.size(); ++i) EXPECT_EQ(fast_frames[i].seq, i + 1);
  EXPECT_EQ(slow->drain().size(), 8u);
  EXPECT_EQ(slow->dropped(), fast_frames.size() - 8);
  EXPECT_EQ(b.gateway.stats()["dropped"], fast_frames.size() - 8);
  b.gateway.unsubscribe(slow);
  EXPECT_EQ(b.gateway.stats()["subscribers"], 1);
}

TEST(Gateway, StatusCodes) {
  Booted b;
  auto& g = b.gateway;
  EXPECT_EQ(g.handle("POST", "/orders", R"({"scenario":"wholesale","quantity":0})").status, 400);
  EXPECT_EQ(g.handle("POST", "/orders", R"({"scenario":"export","quantity":5})").status, 400);
  EXPECT_EQ(g.handle("POST", "/orders", "not json").status, 400);
  EXPECT_EQ(g.handle("POST", "/orders", R"({"scenario":"wholesale","quantity":5,"colour":"red"})").status, 400);
  EXPECT_EQ(g.handle("GET", "/orders", "").status, 405);
  EXPECT_EQ(g.handle("DELETE", "/processes", "").status, 405);
  EXPECT_EQ(g.handle("GET", "/processes/P9", "").status, 404);
  EXPECT_EQ(g.handle("GET", "/inventory/Hermes", "").status, 404);
  EXPECT_EQ(g.handle("GET", "/reports/Nobody1", "").status, 404);
  EXPECT_EQ(g.handle("GET", "/nothing", "").status, 404);

  const auto bad = g.handle("POST", "/orders", R"({"scenario":"wholesale","quantity":-3})");
  EXPECT_EQ(bad.body["error"], "validation-error");
  EXPECT_EQ(bad.body["message"].get<std::string>().find("validation-error"), std::string::npos);

  const auto inv = g.handle("GET", "/inventory/supplier", "");
  EXPECT_EQ(inv.status, 200);
  EXPECT_EQ(inv.body["on_hand"], 10000.0);
  EXPECT_EQ(inv.body["agent"], "supplier");

  const auto agents = g.handle("GET", "/agents", "");
  EXPECT_EQ(agents.status, 200);
  EXPECT_EQ(agents.body.size(), 7u);
}

TEST(Gateway, NoLiveInitiatorIs503) {
  Booted b;
  b.system.stop_agent("wholesaler");
  EXPECT_EQ(b.gateway.handle("POST", "/orders", R"({"scenario":"replenish","quantity":10})").status, 503);
}

TEST(Gateway, ReportNotReadyUntilDelivered) {
  Booted b;
  const auto placed = b.gateway.handle("POST", "/orders", R"({"scenario":"replenish","quantity":100})");
  ASSERT_EQ(placed.status, 202);
  const auto id = placed.body["process_id"].get<std::string>();

  std::string tracking;
  const auto* hermes = b.system.find("Hermes")->skill_as<CarrierSkill>();
  const auto* dpd = b.system.find("DPD")->skill_as<CarrierSkill>();
  for (int i = 0; i < 10000 && tracking.empty(); ++i) {
    b.system.run_until(b.system.now() + 1000);
    for (const auto* c : {hermes, dpd}) {
      const auto t = c->tracking_numbers();
      if (!t.empty()) tracking = t.front();
    }
  }
  ASSERT_FALSE(tracking.empty());
  EXPECT_EQ(b.gateway.handle("GET", "/reports/" + tracking, "").status, 409);
  const auto d = b.gateway.handle("GET", "/deliveries/" + tracking, "");
  EXPECT_EQ(d.status, 200);
  EXPECT_EQ(d.body["tracking_number"], tracking);

  b.system.run_until_idle();
  const auto r = b.gateway.handle("GET", "/reports/" + tracking, "");
  EXPECT_EQ(r.status, 200);
  EXPECT_TRUE(r.body["report"].contains("channels"));
  const auto p = b.gateway.handle("GET", "/processes/" + id, "");
  EXPECT_EQ(p.body["status"], "fulfilled");
  EXPECT_EQ(b.gateway.handle("GET", "/processes", "").body.size(), 1u);
}
