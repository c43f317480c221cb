#include "a2sc/agents.hpp"

#include <algorithm>
#include <cmath>

#include "a2sc/directory.hpp"
#include "a2sc/error.hpp"

namespace a2sc {

namespace {

std::string type_of(const Value& content) {
  return content.is_object() ? content.value("type", std::string()) : std::string();
}

Value error_content(const std::string& code, const std::string& message) {
  return Value{{"type", "error"}, {"code", code}, {"message", message}};
}

template <typename T>
T param(const Value& params, const char* key, T fallback) {
  if (!params.is_object() || !params.contains(key) || params[key].is_null()) return fallback;
  try {
    return params[key].get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(Errc::config_error, std::string("parameter '") + key + "' has the wrong type");
  }
}

GeoPoint geo_param(const Value& params, const char* key, GeoPoint fallback) {
  if (!params.is_object() || !params.contains(key)) return fallback;
  try {
    return geo_from_value(params[key]);
  } catch (const Error& e) {
    throw Error(Errc::config_error, std::string("parameter '") + key + "': " + e.what());
  }
}

}  // namespace

void notify_progress(Agent& agent, const std::string& process, const std::string& message, const std::string& level) {
  agent.notify("notification",
               Value{{"agent", agent.name()}, {"process", process}, {"message", message}, {"level", level}});
}

// -- trader configuration ---------------------------------------------------------------

TraderConfig TraderConfig::from_params(const std::string& type, const Value& p) {
  TraderConfig c;
  c.type = type;
  c.product = param<std::string>(p, "product", "beef");
  c.location = geo_param(p, "location", GeoPoint{52.2053, 0.1218});
  c.logistics = param<std::string>(p, "logistics", "logistics");
  c.inventory.product = c.product;

  StrategyParams buy;
  if (p.is_object() && p.contains("vendor")) {
    const auto& v = p["vendor"];
    if (v.contains("min_performance")) buy.min_performance = v["min_performance"].get<double>();
    if (v.contains("within_km")) {
      buy.within_km = v["within_km"].get<double>();
      buy.near = geo_param(v, "near", c.location);
    }
  }

  if (type == "supplier") {
    c.sell = SellConfig{param<std::string>(p, "sell_kind", "meat-supply"), param(p, "unit_price", 6.0), true};
    c.inventory.on_hand = param(p, "stock", 10000.0);
  } else if (type == "wholesaler") {
    c.sell = SellConfig{param<std::string>(p, "sell_kind", "meat-wholesale"), param(p, "expected_price", 8.0),
                        false};
    buy.max_price = param(p, "max_price", 7.0);
    c.buy = BuyConfig{param<std::string>(p, "buy_kind", "meat-supply"), buy, true,
                      param(p, "auto_replenish", true)};
    c.inventory.on_hand = param(p, "stock", 0.0);
    c.inventory.reorder_point = param(p, "reorder_point", 20.0);
    c.inventory.reorder_quantity = param(p, "reorder_quantity", 100.0);
  } else if (type == "retailer") {
    buy.max_price = param(p, "max_price", 12.0);
    c.buy = BuyConfig{param<std::string>(p, "buy_kind", "meat-wholesale"), buy, false, false};
    c.inventory.on_hand = param(p, "stock", 0.0);
  } else {
    throw Error(Errc::config_error, "unknown trader type '" + type + "'");
  }
  if (c.sell && c.sell->expected_price < 0.0) throw Error(Errc::config_error, type + ": negative price");
  if (c.buy && c.buy->strategy.max_price < 0.0) throw Error(Errc::config_error, type + ": negative max_price");
  try {
    validate(c.inventory);
  } catch (const Error& e) {
    throw Error(Errc::config_error, type + ": " + e.detail());
  }
  return c;
}

// -- trader -------------------------------------------------------------------------------

TraderSkill::TraderSkill(TraderConfig cfg) : cfg_(std::move(cfg)), inventory_(cfg_.inventory) {}

std::vector<std::string> TraderSkill::protocols() const {
  return {std::string(kContractNet), std::string(kRequestResponse)};
}

bool TraderSkill::accepts(const Envelope& e) const {
  const auto type = type_of(e.content);
  if (e.performative.act == Act::cfp) return cfg_.sell.has_value() && type == "purchase-order";
  return cfg_.sell.has_value() && type == "delivery-status";
}

void TraderSkill::setup(Agent& agent) {
  set_inventory(agent, cfg_.inventory, "initial", cfg_.inventory.on_hand, "");
  if (cfg_.sell && !cfg_.sell->quote_delivery) {
    // Wholesale deliveries use one option fixed up front.
    agent.add_behaviour(Behaviour{"predetermine-delivery", Behaviour::Kind::one_shot, Duration{0},
                                  [this](Agent& a) {
                                    const Value request{{"type", "delivery-options-request"},
                                                        {"order_id", "predetermined-" + a.name()},
                                                        {"origin", to_value(cfg_.location)},
                                                        {"destination", to_value(cfg_.location)},
                                                        {"quantity", cfg_.inventory.reorder_quantity}};
                                    predetermined_request_ = a.rr_request(*this, local_address(cfg_.logistics),
                                                                          Method::get, request, kLogisticsOntology);
                                  },
                                  0});
  }
}

InventoryRecord TraderSkill::inventory() const {
  std::lock_guard lock(mutex_);
  return inventory_;
}

double TraderSkill::in_transit_out() const {
  std::lock_guard lock(mutex_);
  return in_transit_out_;
}

bool TraderSkill::replenishment_in_flight() const {
  std::lock_guard lock(mutex_);
  return replenishing_;
}

std::optional<DeliveryOption> TraderSkill::predetermined_option() const {
  std::lock_guard lock(mutex_);
  return predetermined_;
}

Value TraderSkill::status() const {
  std::lock_guard lock(mutex_);
  Value v{{"inventory", to_value(inventory_)},
          {"in_transit_out", in_transit_out_},
          {"open_purchases", purchases_.size() + searches_.size()},
          {"open_sales", sales_.size()},
          {"replenishing", replenishing_}};
  if (predetermined_) v["predetermined_option"] = to_value(*predetermined_);
  return v;
}

void TraderSkill::set_inventory(Agent& agent, const InventoryRecord& next, const std::string& reason, double delta,
                                const std::string& order) {
  validate(next);
  {
    std::lock_guard lock(mutex_);
    inventory_ = next;
  }
  agent.notify("inventory", Value{{"agent", agent.name()},
                                  {"product", next.product},
                                  {"on_hand", next.on_hand},
                                  {"reserved", next.reserved},
                                  {"delta", delta},
                                  {"reason", reason},
                                  {"order_id", order}});
}

std::string TraderSkill::launch(Agent& agent, double quantity, std::optional<StrategyParams> strategy,
                                const std::string& process) {
  if (!cfg_.buy) throw Error(Errc::config_error, agent.name() + " does not buy");
  const bool replenishment = cfg_.buy->kind == "meat-supply";
  auto& ledger = agent.system().processes();
  const std::string id = process.empty()
                             ? ledger.open(replenishment ? "replenish" : "wholesale", agent.name(),
                                           Value{{"product", cfg_.product}, {"quantity", quantity}})
                             : process;
  if (replenishment && replenishment_in_flight()) {
    notify_progress(agent, id, "a replenishment is already in flight", "warning");
    ledger.close(id, false, "replenishment-in-flight");
    return id;
  }
  if (!(quantity > 0.0) || !std::isfinite(quantity)) {
    ledger.close(id, false, "validation-error", Value{{"reason", "quantity must be > 0"}});
    return id;
  }
  const auto directory = agent.discovery();
  if (!directory) {
    ledger.close(id, false, "no-supplier-found", Value{{"reason", "no directory configured"}});
    return id;
  }

  Purchase p;
  p.process = id;
  p.replenishment = replenishment;
  p.strategy = strategy.value_or(cfg_.buy->strategy);
  p.order.id = id;
  p.order.buyer = agent.address();
  p.order.product = cfg_.product;
  p.order.quantity = quantity;
  p.order.unit_price = p.strategy.max_price;
  p.order.delivery_address = cfg_.location;
  if (replenishment) {
    std::lock_guard lock(mutex_);
    replenishing_ = true;
  }
  ledger.annotate(id, "quantity", quantity);
  notify_progress(agent, id, "searching the directory for " + cfg_.buy->kind);
  const auto conv = agent.rr_request(*this, *directory, Method::get,
                                     search_request(vendor_query(cfg_.buy->kind, cfg_.product, p.strategy)),
                                     kDirectoryOntology, std::nullopt, std::string(kDiscovery));
  searches_.emplace(conv, std::move(p));
  return id;
}

void TraderSkill::close_purchase(Agent& agent, const std::string& key, bool ok, const std::string& outcome,
                                 const Value& detail) {
  Purchase p;
  if (auto it = purchases_.find(key); it != purchases_.end()) {
    p = std::move(it->second);
    purchases_.erase(it);
  } else if (auto it2 = searches_.find(key); it2 != searches_.end()) {
    p = std::move(it2->second);
    searches_.erase(it2);
  } else {
    return;
  }
  if (p.replenishment) {
    std::lock_guard lock(mutex_);
    replenishing_ = false;
  }
  agent.system().processes().close(p.process, ok, outcome, detail);
  notify_progress(agent, p.process, ok ? "process fulfilled" : "process failed: " + outcome,
                  ok ? "info" : "warning");
  // A failed replenishment is not retried here, or a dead market would spin.
  if (ok && p.replenishment) maybe_replenish(agent);
}

void TraderSkill::maybe_replenish(Agent& agent) {
  if (!cfg_.buy || !cfg_.buy->auto_replenish) return;
  const auto draft = check_replenishment(inventory(), cfg_.buy->strategy, replenishment_in_flight());
  if (!draft) return;
  const auto id = agent.system().processes().open("replenish", agent.name(),
                                                  Value{{"product", cfg_.product}, {"quantity", draft->quantity},
                                                        {"automatic", true}});
  notify_progress(agent, id, "stock at or below the reorder point, replenishing");
  launch(agent, draft->quantity, std::nullopt, id);
}

void TraderSkill::on_event(Agent& agent, const std::string& conversation, const DialogueEvent& event) {
  if (searches_.count(conversation) != 0 || purchases_.count(conversation) != 0) {
    on_buy_event(agent, conversation, event);
    return;
  }
  if (!predetermined_request_.empty() && conversation == predetermined_request_) {
    if (event.kind == "response" && type_of(event.detail) == "delivery-options") {
      std::vector<DeliveryOption> opts;
      for (const auto& o : event.detail.value("options", Value::array())) opts.push_back(option_from_value(o));
      if (!opts.empty()) {
        const auto chosen = select_delivery_option(opts);
        {
          std::lock_guard lock(mutex_);
          predetermined_ = chosen;
        }
        notify_progress(agent, "", "wholesale delivery option fixed: " + chosen.id);
      }
    } else if (event.kind == "response" || event.kind == "timeout") {
      notify_progress(agent, "", "no wholesale delivery option available", "warning");
    }
    return;
  }
  on_sell_event(agent, conversation, event);
}

void TraderSkill::on_buy_event(Agent& agent, const std::string& conversation, const DialogueEvent& event) {
  if (auto it = searches_.find(conversation); it != searches_.end()) {
    if (event.kind == "response") {
      std::vector<ServiceDescription> found;
      try {
        found = search_results(event.detail);
      } catch (const Error& e) {
        close_purchase(agent, conversation, false, "no-supplier-found", Value{{"reason", e.detail()}});
        return;
      }
      std::vector<AgentAddress> participants;
      for (const auto& d : found) {
        if (d.owner.name != agent.name()) participants.push_back(d.owner);
      }
      if (participants.empty()) {
        close_purchase(agent, conversation, false, "no-supplier-found");
        return;
      }
      Purchase p = std::move(it->second);
      searches_.erase(it);
      Value cfp = to_value(p.order);
      cfp["type"] = "purchase-order";
      p.order.advance(OrderStatus::proposed);
      const auto process = p.process;
      const auto cn = agent.cn_start(*this, participants, cfp);
      p.cn = cn;
      purchases_.emplace(cn, std::move(p));
      agent.system().processes().annotate(process, "conversation", cn);
      notify_progress(agent, process, "call for proposals sent to " + std::to_string(participants.size()) + " vendor(s)");
    } else if (event.kind == "timeout" || event.kind == "undeliverable") {
      close_purchase(agent, conversation, false, "discovery-unreachable");
    }
    return;
  }

  auto it = purchases_.find(conversation);
  if (it == purchases_.end()) return;
  Purchase& p = it->second;
  const auto& kind = event.kind;
  if (kind == "proposal") {
    notify_progress(agent, p.process, "proposal received from " + event.detail.value("from", std::string()));
  } else if (kind == "refusal") {
    p.refusals.push_back(event.detail.value("content", Value::object()).value("reason", std::string("refused")));
  } else if (kind == "select") {
    std::vector<Proposal> props;
    for (const auto& [who, content] : event.detail.items()) {
      try {
        auto prop = proposal_from_value(content);
        prop.proposer = local_address(who);
        props.push_back(std::move(prop));
      } catch (const Error& e) {
        notify_progress(agent, p.process, "ignoring malformed proposal from " + who, "warning");
      }
    }
    const Value reject{{"type", "order-rejection"}, {"order_id", p.order.id}, {"reason", "not-selected"}};
    try {
      const auto winner = evaluate_proposals(props, p.strategy);
      Value accept{{"type", "order-acceptance"}, {"order_id", p.order.id}};
      if (cfg_.buy->choose_delivery && !winner.delivery_options.empty()) {
        const auto option = select_delivery_option(winner.delivery_options, p.strategy);
        accept["delivery_option"] = option.id;
        p.order.delivery_option = option.id;
        agent.system().processes().annotate(p.process, "delivery_option", to_value(option));
      }
      p.order.unit_price = winner.unit_price;
      p.order.advance(OrderStatus::accepted);
      agent.system().processes().annotate(p.process, "seller", winner.proposer.name);
      agent.system().processes().annotate(p.process, "unit_price", winner.unit_price);
      const auto process = p.process;
      agent.cn_award(conversation, winner.proposer.name, accept, reject);
      notify_progress(agent, process, "awarded to " + winner.proposer.name);
    } catch (const Error& e) {
      if (e.code() != Errc::no_acceptable_proposal) throw;
      agent.cn_decline(conversation, Value{{"type", "order-rejection"},
                                           {"order_id", p.order.id},
                                           {"reason", "price-above-maximum"}});
      close_purchase(agent, conversation, false, "no-acceptable-proposal");
    }
  } else if (kind == "refused") {
    Value reasons = p.refusals;
    close_purchase(agent, conversation, false, "order-rejected", Value{{"reasons", reasons}});
  } else if (kind == "timeout") {
    close_purchase(agent, conversation, false, "negotiation-timeout");
  } else if (kind == "result") {
    const double qty = p.order.quantity;
    const auto order_id = p.order.id;
    p.order.advance(OrderStatus::fulfilled);
    set_inventory(agent, apply_inbound(inventory(), qty), "inbound", qty, order_id);
    const auto tracking = event.detail.value("tracking_number", std::string());
    agent.cn_complete(conversation, Value{{"type", "receipt"}, {"order_id", order_id}, {"quantity", qty}});
    close_purchase(agent, conversation, true, "fulfilled", Value{{"tracking_number", tracking}});
  } else if (kind == "failure") {
    close_purchase(agent, conversation, false, "delivery-failure",
                   Value{{"reason", event.detail.value("reason", std::string())}});
  } else if (kind == "violation") {
    notify_progress(agent, p.process, "protocol violation: " + event.detail.value("reason", std::string()),
                    "warning");
  }
}

void TraderSkill::on_sell_event(Agent& agent, const std::string& conversation, const DialogueEvent& event) {
  if (auto it = option_requests_.find(conversation); it != option_requests_.end()) {
    const auto sale_conv = it->second;
    option_requests_.erase(it);
    const auto sale = sales_.find(sale_conv);
    if (sale == sales_.end()) return;
    std::vector<DeliveryOption> opts;
    if (event.kind == "response" && type_of(event.detail) == "delivery-options") {
      for (const auto& o : event.detail.value("options", Value::array())) opts.push_back(option_from_value(o));
    }
    if (opts.empty()) {
      drop_sale(agent, sale_conv, "no-delivery-options");
      return;
    }
    Proposal prop{agent.address(), sale->second.order.id, cfg_.sell->expected_price, sale->second.order.quantity,
                  opts};
    Value content = to_value(prop);
    content["type"] = "proposal";
    sale->second.stage = "proposed";
    agent.cn_propose(sale_conv, content);
    return;
  }
  if (auto it = bookings_.find(conversation); it != bookings_.end()) {
    const auto sale_conv = it->second;
    bookings_.erase(it);
    const auto sale = sales_.find(sale_conv);
    if (sale == sales_.end()) return;
    if (event.kind == "response" && type_of(event.detail) == "delivery-booked") {
      sale->second.tracking = event.detail.value("tracking_number", std::string());
      notify_progress(agent, sale->second.order.id, "delivery booked, tracking " + sale->second.tracking);
      return;
    }
    // Booking failed: the goods never left, take them back.
    const double qty = sale->second.order.quantity;
    const auto order_id = sale->second.order.id;
    {
      std::lock_guard lock(mutex_);
      in_transit_out_ -= qty;
    }
    set_inventory(agent, apply_inbound(inventory(), qty), "return", qty, order_id);
    const auto reason = event.kind == "response" ? event.detail.value("code", std::string("booking-failed"))
                                                 : std::string("logistics-unreachable");
    sales_.erase(sale);
    agent.cn_fail(sale_conv, Value{{"type", "delivery-failure"}, {"order_id", order_id}, {"reason", reason}});
    return;
  }

  if (event.kind == "cfp") {
    on_cfp(agent, conversation, event.detail);
    return;
  }
  if (event.kind == "request") {
    on_delivery_status(agent, conversation, event.detail);
    return;
  }
  const auto it = sales_.find(conversation);
  if (it == sales_.end()) return;
  Sale& sale = it->second;
  if (event.kind == "accepted") {
    const double qty = sale.order.quantity;
    const auto order_id = sale.order.id;
    std::string option = event.detail.value("delivery_option", std::string());
    if (option.empty()) {
      const auto fixed = predetermined_option();
      option = fixed ? fixed->id : "standard";
    }
    sale.order.delivery_option = option;
    sale.stage = "dispatched";
    set_inventory(agent, apply_outbound(inventory(), qty), "outbound", -qty, order_id);
    {
      std::lock_guard lock(mutex_);
      in_transit_out_ += qty;
    }
    const Value order{{"type", "delivery-order"},
                      {"order_id", order_id},
                      {"option_id", option},
                      {"origin", to_value(cfg_.location)},
                      {"destination", to_value(sale.order.delivery_address)},
                      {"quantity", qty},
                      {"consignee", sale.order.buyer.name}};
    notify_progress(agent, order_id, "order accepted, booking delivery (" + option + ")");
    const auto booking = agent.rr_request(*this, local_address(cfg_.logistics), Method::post, order,
                                          kLogisticsOntology);
    bookings_.emplace(booking, conversation);
    maybe_replenish(agent);
  } else if (event.kind == "rejected" || event.kind == "timeout") {
    drop_sale(agent, conversation, event.kind);
  } else if (event.kind == "receipt") {
    {
      std::lock_guard lock(mutex_);
      in_transit_out_ -= sale.order.quantity;
    }
    notify_progress(agent, sale.order.id, "receipt confirmed by " + sale.order.buyer.name);
    sales_.erase(it);
  }
}

void TraderSkill::on_cfp(Agent& agent, const std::string& conversation, const Value& content) {
  PurchaseOrder order;
  try {
    order = order_from_value(content);
  } catch (const Error& e) {
    agent.cn_refuse(conversation, Value{{"type", "refusal"}, {"order_id", content.value("order_id", std::string())},
                                        {"reason", "malformed-order"}});
    return;
  }
  if (order.product != cfg_.product) {
    agent.cn_refuse(conversation, Value{{"type", "refusal"}, {"order_id", order.id}, {"reason", "product-mismatch"}});
    return;
  }
  auto inv = inventory();
  const StrategyParams sell{cfg_.sell->expected_price, 0.0, std::nullopt, std::nullopt, std::nullopt};
  const auto verdict = assess_order(order, inv, sell);
  if (const auto* r = std::get_if<Reject>(&verdict)) {
    notify_progress(agent, order.id, "order refused: " + r->reason, "warning");
    agent.cn_refuse(conversation, Value{{"type", "refusal"}, {"order_id", order.id}, {"reason", r->reason}});
    return;
  }
  set_inventory(agent, inv, "reserve", 0.0, order.id);
  order.seller = agent.address();
  sales_[conversation] = Sale{order, conversation, "assessed", ""};
  if (cfg_.sell->quote_delivery) {
    const Value request{{"type", "delivery-options-request"},
                        {"order_id", order.id},
                        {"origin", to_value(cfg_.location)},
                        {"destination", to_value(order.delivery_address)},
                        {"quantity", order.quantity}};
    const auto conv = agent.rr_request(*this, local_address(cfg_.logistics), Method::get, request,
                                       kLogisticsOntology);
    option_requests_.emplace(conv, conversation);
    return;
  }
  Proposal prop{agent.address(), order.id, cfg_.sell->expected_price, order.quantity, {}};
  Value proposal = to_value(prop);
  proposal["type"] = "proposal";
  sales_[conversation].stage = "proposed";
  agent.cn_propose(conversation, proposal);
}

void TraderSkill::drop_sale(Agent& agent, const std::string& conversation, const std::string& why) {
  const auto it = sales_.find(conversation);
  if (it == sales_.end()) return;
  const auto order = it->second.order;
  sales_.erase(it);
  set_inventory(agent, release(inventory(), order.quantity), "release", 0.0, order.id);
  const auto* d = agent.contract_net(conversation);
  if (d != nullptr && d->state == CnState::cfp_received) {
    agent.cn_refuse(conversation, Value{{"type", "refusal"}, {"order_id", order.id}, {"reason", why}});
  }
}

void TraderSkill::on_delivery_status(Agent& agent, const std::string& conversation, const Value& content) {
  agent.rr_respond(conversation, Value{{"type", "ack"}});
  const auto order_id = content.value("order_id", std::string());
  const auto it = std::find_if(sales_.begin(), sales_.end(),
                               [&](const auto& kv) { return kv.second.order.id == order_id; });
  if (it == sales_.end()) return;
  const auto cn = it->first;
  Sale& sale = it->second;
  const auto status = content.value("status", std::string());
  const auto tracking = content.value("tracking_number", sale.tracking);
  if (status == "delivered") {
    sale.stage = "delivered";
    notify_progress(agent, order_id, "delivery " + tracking + " completed");
    agent.cn_inform(cn, Value{{"type", "delivery-notification"},
                              {"order_id", order_id},
                              {"tracking_number", tracking},
                              {"status", "delivered"},
                              {"quantity", sale.order.quantity}});
  } else if (status == "failed") {
    {
      std::lock_guard lock(mutex_);
      in_transit_out_ -= sale.order.quantity;
    }
    sales_.erase(it);
    agent.cn_fail(cn, Value{{"type", "delivery-failure"}, {"order_id", order_id}, {"reason", "delivery-failed"}});
  }
}

// -- logistics ------------------------------------------------------------------------------

LogisticsConfig LogisticsConfig::from_params(const Value& p) {
  LogisticsConfig c;
  c.margin = param(p, "margin", c.margin);
  c.carrier_kind = param<std::string>(p, "carrier_kind", c.carrier_kind);
  if (c.margin < 0.0) throw Error(Errc::config_error, "logistics margin must be >= 0");
  return c;
}

LogisticsSkill::LogisticsSkill(LogisticsConfig cfg) : cfg_(std::move(cfg)) {}

bool LogisticsSkill::accepts(const Envelope& e) const {
  static const std::set<std::string> kTypes{"delivery-options-request", "delivery-order", "delivery-status",
                                            "delivery-alert"};
  return e.ontology == kLogisticsOntology && kTypes.count(type_of(e.content)) != 0;
}

std::vector<DeliveryOption> LogisticsSkill::build_options(const std::map<std::string, Value>& quotes,
                                                          const AgentAddress& self, double margin) {
  std::map<std::string, std::pair<double, std::int64_t>> levels;
  for (const auto& [carrier, quote] : quotes) {
    for (const auto& s : quote.value("services", Value::array())) {
      const auto id = s.value("service_level", std::string());
      const double rate = s.value("rate", 0.0);
      const std::int64_t eta = s.value("eta_ms", std::int64_t{0});
      if (id.empty() || rate < 0.0 || eta <= 0) continue;
      auto [it, fresh] = levels.emplace(id, std::make_pair(rate, eta));
      if (!fresh) {
        it->second.first = std::max(it->second.first, rate);
        it->second.second = std::max(it->second.second, eta);
      }
    }
  }
  std::vector<DeliveryOption> out;
  for (const auto& [id, v] : levels) {
    const double rate = std::round(v.first * (1.0 + margin) * 100.0) / 100.0;
    out.push_back(DeliveryOption{id, self, rate, Duration{v.second}});
  }
  return out;
}

void LogisticsSkill::start_job(Agent& agent, const std::string& conversation, const Value& request,
                               Job::Purpose purpose) {
  Job job;
  job.purpose = purpose;
  job.server_conversation = conversation;
  job.request = request;
  jobs_[conversation] = job;
  const auto directory = agent.discovery();
  if (!directory) {
    fail_job(agent, conversation, "discovery-unreachable", "no directory configured");
    return;
  }
  Query q{cfg_.carrier_kind, {}};
  const auto search = agent.rr_request(*this, *directory, Method::get, search_request(q), kDirectoryOntology,
                                       std::nullopt, std::string(kDiscovery));
  job_of_[search] = conversation;
  if (const auto it = jobs_.find(conversation); it != jobs_.end()) it->second.search_conversation = search;
}

void LogisticsSkill::on_search(Agent& agent, Job& job, const Value& response) {
  std::vector<ServiceDescription> found;
  try {
    found = search_results(response);
  } catch (const Error& e) {
    fail_job(agent, job.server_conversation, "no-carrier", e.detail());
    return;
  }
  if (found.empty()) {
    fail_job(agent, job.server_conversation, "no-carrier", "no 3PL registered");
    return;
  }
  const auto job_id = job.server_conversation;
  const Value quote_request{{"type", "quote-request"},
                            {"origin", job.request.value("origin", Value::array())},
                            {"destination", job.request.value("destination", Value::array())},
                            {"quantity", job.request.value("quantity", 0.0)}};
  std::vector<AgentAddress> carriers;
  for (const auto& d : found) carriers.push_back(d.owner);
  for (const auto& c : carriers) {
    jobs_[job_id].carriers[c.name] = c;
    // An unreachable 3PL surfaces later as the request timeout.
    const auto conv = agent.rr_request(*this, c, Method::get, quote_request, kLogisticsOntology);
    const auto it = jobs_.find(job_id);
    if (it == jobs_.end()) return;
    it->second.waiting.insert(conv);
    job_of_[conv] = job_id;
  }
  if (const auto it = jobs_.find(job_id); it != jobs_.end() && it->second.waiting.empty()) {
    finish_quotes(agent, job_id);
  }
}

void LogisticsSkill::finish_quotes(Agent& agent, const std::string& job_id) {
  const auto it = jobs_.find(job_id);
  if (it == jobs_.end()) return;
  Job& job = it->second;
  const auto order_id = job.request.value("order_id", std::string());
  if (job.purpose == Job::Purpose::options) {
    const auto options = build_options(job.quotes, agent.address(), cfg_.margin);
    if (options.empty()) {
      fail_job(agent, job_id, "no-carrier", "no 3PL quoted");
      return;
    }
    Value list = Value::array();
    for (const auto& o : options) list.push_back(to_value(o));
    agent.rr_respond(job_id, Value{{"type", "delivery-options"}, {"order_id", order_id}, {"options", list}});
    jobs_.erase(it);
    return;
  }
  const auto level = job.request.value("option_id", std::string("standard"));
  std::vector<AgentAddress> eligible;
  for (const auto& [name, quote] : job.quotes) {
    for (const auto& s : quote.value("services", Value::array())) {
      if (s.value("service_level", std::string()) == level) {
        eligible.push_back(job.carriers.at(name));
        break;
      }
    }
  }
  if (eligible.empty()) {
    fail_job(agent, job_id, "no-carrier", "no 3PL offers " + level);
    return;
  }
  const auto chosen = select_3pl(eligible, agent.rng());
  const Value order{{"type", "delivery-order"},
                    {"order_id", order_id},
                    {"service_level", level},
                    {"origin", job.request.value("origin", Value::array())},
                    {"destination", job.request.value("destination", Value::array())},
                    {"quantity", job.request.value("quantity", 0.0)}};
  notify_progress(agent, order_id, "subcontracting delivery to " + chosen.name);
  const auto conv = agent.rr_request(*this, chosen, Method::post, order, kLogisticsOntology);
  if (const auto j = jobs_.find(job_id); j != jobs_.end()) {
    j->second.booking_conversation = conv;
    job_of_[conv] = job_id;
  }
}

void LogisticsSkill::fail_job(Agent& agent, const std::string& job_id, const std::string& code,
                              const std::string& message) {
  if (jobs_.erase(job_id) == 0) return;
  notify_progress(agent, "", "delivery request failed: " + message, "warning");
  agent.rr_respond(job_id, error_content(code, message));
}

void LogisticsSkill::on_event(Agent& agent, const std::string& conversation, const DialogueEvent& event) {
  if (event.kind == "request") {
    const auto type = type_of(event.detail);
    if (type == "delivery-options-request") {
      start_job(agent, conversation, event.detail, Job::Purpose::options);
    } else if (type == "delivery-order") {
      start_job(agent, conversation, event.detail, Job::Purpose::booking);
    } else if (type == "delivery-status") {
      agent.rr_respond(conversation, Value{{"type", "ack"}});
      const auto tracking = event.detail.value("tracking_number", std::string());
      const auto b = bookings_.find(tracking);
      if (b == bookings_.end()) return;
      Value forward = event.detail;
      forward["order_id"] = b->second.value("order_id", std::string());
      notify_progress(agent, forward["order_id"].get<std::string>(),
                      "delivery " + tracking + " " + event.detail.value("status", std::string()));
      const auto conv = agent.rr_request(*this, local_address(b->second.value("booker", std::string())),
                                         Method::post, forward, kLogisticsOntology);
      forwards_[conv] = tracking;
    } else if (type == "delivery-alert") {
      agent.rr_respond(conversation, Value{{"type", "ack"}});
      ++alerts_;
      const auto& alert = event.detail.value("alert", Value::object());
      notify_progress(agent, "",
                      "alert on " + event.detail.value("tracking_number", std::string()) + ": " +
                          alert.value("channel", std::string()) + " " + alert.value("side", std::string()) + " bound",
                      "warning");
    }
    return;
  }
  if (forwards_.count(conversation) != 0) {
    forwards_.erase(conversation);
    return;
  }
  const auto owner = job_of_.find(conversation);
  if (owner == job_of_.end()) return;
  const auto job_id = owner->second;
  job_of_.erase(owner);
  const auto it = jobs_.find(job_id);
  if (it == jobs_.end()) return;
  Job& job = it->second;

  if (conversation == job.booking_conversation) {
    if (event.kind == "response" && type_of(event.detail) == "delivery-booked") {
      const auto tracking = event.detail.value("tracking_number", std::string());
      const auto* server = agent.request_response(job_id);
      const auto booker = server != nullptr ? server->peer.name : std::string();
      bookings_[tracking] = Value{{"booker", booker},
                                  {"order_id", job.request.value("order_id", std::string())},
                                  {"carrier", event.detail.value("carrier", std::string())}};
      Value reply = event.detail;
      reply["order_id"] = job.request.value("order_id", std::string());
      jobs_.erase(it);
      agent.rr_respond(job_id, reply);
    } else {
      fail_job(agent, job_id, event.kind == "response" ? event.detail.value("code", std::string("booking-failed"))
                                                       : std::string("carrier-unreachable"),
               "3PL did not book the delivery");
    }
    return;
  }
  if (conversation == job.search_conversation) {
    if (event.kind == "response") {
      on_search(agent, job, event.detail);
    } else {
      fail_job(agent, job_id, "discovery-unreachable", "directory did not answer");
    }
    return;
  }
  job.waiting.erase(conversation);
  if (event.kind == "response" && type_of(event.detail) == "delivery-quote") {
    job.quotes[event.detail.value("carrier", std::string())] = event.detail;
  }
  if (job.waiting.empty()) finish_quotes(agent, job_id);
}

Value LogisticsSkill::status() const {
  return Value{{"open_jobs", jobs_.size()}, {"bookings", bookings_.size()}, {"alerts", alerts_}};
}

// -- 3PL --------------------------------------------------------------------------------------

CarrierConfig CarrierConfig::from_params(const Value& p, const std::filesystem::path& base_dir) {
  CarrierConfig c;
  c.base_rate = param(p, "base_rate", c.base_rate);
  c.rate_per_km = param(p, "rate_per_km", c.rate_per_km);
  c.speed_kmh = param(p, "speed_kmh", c.speed_kmh);
  c.handling = Duration{param<std::int64_t>(p, "handling_ms", c.handling.count())};
  c.location = geo_param(p, "location", c.location);
  if (p.is_object() && p.contains("services")) {
    c.services.clear();
    for (const auto& s : p["services"]) {
      c.services.push_back(ServiceLevel{s.at("id").get<std::string>(), s.value("rate_multiplier", 1.0),
                                        s.value("eta_factor", 1.0)});
    }
  }
  if (p.is_object() && p.contains("traces")) {
    for (const auto& t : p["traces"]) {
      std::filesystem::path path = t.get<std::string>();
      if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
      c.traces.push_back(path);
    }
  }
  if (p.is_object() && p.contains("thresholds")) c.thresholds = thresholds_from_value(p["thresholds"]);
  if (c.base_rate < 0.0 || c.rate_per_km < 0.0 || c.speed_kmh <= 0.0 || c.services.empty()) {
    throw Error(Errc::config_error, "3pl: rates must be >= 0, speed > 0 and at least one service level");
  }
  return c;
}

namespace {

std::vector<Trace> load_all(const std::vector<std::filesystem::path>& paths) {
  std::vector<Trace> out;
  for (const auto& path : paths) {
    try {
      out.push_back(load_trace(path));
    } catch (const Error& e) {
      throw Error(Errc::config_error, "trace " + path.string() + ": " + e.detail());
    }
  }
  return out;
}

}  // namespace

CarrierSkill::CarrierSkill(CarrierConfig cfg) : CarrierSkill(cfg, load_all(cfg.traces)) {}

CarrierSkill::CarrierSkill(CarrierConfig cfg, std::vector<Trace> traces)
    : cfg_(std::move(cfg)), traces_(std::move(traces)) {
  if (traces_.empty()) throw Error(Errc::config_error, "3pl needs at least one trace");
}

bool CarrierSkill::accepts(const Envelope& e) const {
  const auto type = type_of(e.content);
  return e.ontology == kLogisticsOntology && (type == "quote-request" || type == "delivery-order");
}

void CarrierSkill::setup(Agent&) {}

Value CarrierSkill::quote(const std::string& carrier, GeoPoint origin, GeoPoint destination) const {
  const double km = haversine_km(origin, destination);
  Value services = Value::array();
  for (const auto& s : cfg_.services) {
    const double rate = std::round((cfg_.base_rate + cfg_.rate_per_km * km) * s.rate_multiplier * 100.0) / 100.0;
    const auto travel = static_cast<std::int64_t>(std::llround(km / cfg_.speed_kmh * 3.6e6 * s.eta_factor));
    const auto eta = std::max<std::int64_t>(1, travel + static_cast<std::int64_t>(
                                                            std::llround(cfg_.handling.count() * s.eta_factor)));
    services.push_back(Value{{"service_level", s.id}, {"rate", rate}, {"eta_ms", eta}});
  }
  return Value{{"type", "delivery-quote"}, {"carrier", carrier}, {"services", services}};
}

void CarrierSkill::on_event(Agent& agent, const std::string& conversation, const DialogueEvent& event) {
  if (event.kind != "request") return;
  const auto type = type_of(event.detail);
  GeoPoint origin;
  GeoPoint destination;
  try {
    origin = geo_from_value(event.detail.at("origin"));
    destination = geo_from_value(event.detail.at("destination"));
  } catch (const std::exception& e) {
    agent.rr_respond(conversation, error_content("validation-error", e.what()));
    return;
  }
  if (type == "quote-request") {
    agent.rr_respond(conversation, quote(agent.name(), origin, destination));
    return;
  }
  const auto level = event.detail.value("service_level", std::string());
  if (std::none_of(cfg_.services.begin(), cfg_.services.end(), [&](const auto& s) { return s.id == level; })) {
    agent.rr_respond(conversation, error_content("unknown-service-level", level));
    return;
  }
  DeliveryJob job;
  job.tracking_number = tracking_.next(agent.name(), agent.now());
  job.order_id = event.detail.value("order_id", std::string());
  job.origin = origin;
  job.destination = destination;
  job.carrier = agent.address();
  job.trace = traces_[booked_++ % traces_.size()];
  job.thresholds = cfg_.thresholds;
  const auto tracking = job.tracking_number;
  DeliveryReplay replay(std::move(job));
  replay.start(agent.now());
  const auto first = *replay.next_due();
  const auto* server = agent.request_response(conversation);
  logistics_of_[tracking] = server != nullptr ? server->peer.name : std::string("logistics");
  Value view;
  {
    std::lock_guard lock(mutex_);
    view = to_value(replay.job());
    replays_.emplace(tracking, std::move(replay));
  }
  agent.rr_respond(conversation, Value{{"type", "delivery-booked"},
                                       {"order_id", view["order_id"]},
                                       {"tracking_number", tracking},
                                       {"carrier", agent.name()}});
  view["kind"] = "delivery";
  agent.notify("status", view);
  notify_progress(agent, view["order_id"].get<std::string>(), "delivery " + tracking + " commencing");
  agent.schedule(first, [this, tracking](Agent& a) { step(a, tracking); });
}

void CarrierSkill::step(Agent& agent, const std::string& tracking) {
  DeliveryReplay::Step s;
  std::optional<Timestamp> next;
  std::string order_id;
  Value view;
  {
    std::lock_guard lock(mutex_);
    auto& replay = replays_.at(tracking);
    s = replay.advance();
    next = replay.next_due();
    order_id = replay.job().order_id;
    if (s.last) view = to_value(replay.job());
  }
  const auto& p = s.point;
  agent.notify("location", Value{{"tracking_number", tracking},
                                 {"order_id", order_id},
                                 {"index", s.index},
                                 {"t", p.t},
                                 {"lat", p.latitude},
                                 {"lon", p.longitude},
                                 {"elevation_m", p.elevation}});
  agent.notify("sensor", Value{{"tracking_number", tracking},
                               {"order_id", order_id},
                               {"index", s.index},
                               {"t", p.t},
                               {"temp_c", p.temperature},
                               {"humidity_pct", p.humidity},
                               {"light_lux", p.light}});
  for (const auto& alert : s.alerts) {
    Value a = to_value(alert);
    agent.notify("alert", Value{{"tracking_number", tracking}, {"order_id", order_id}, {"alert", a}});
    agent.rr_request(*this, local_address(logistics_of_[tracking]), Method::post,
                     Value{{"type", "delivery-alert"}, {"tracking_number", tracking}, {"alert", a}},
                     kLogisticsOntology);
  }
  if (!s.last) {
    agent.schedule(*next, [this, tracking](Agent& a) { step(a, tracking); });
    return;
  }
  view["kind"] = "delivery";
  agent.notify("status", view);
  Trace trace;
  Thresholds thresholds;
  {
    std::lock_guard lock(mutex_);
    trace = replays_.at(tracking).job().trace;
    thresholds = replays_.at(tracking).job().thresholds;
  }
  agent.submit_task([trace, thresholds](const ProgressFn&) { return to_value(generate_report(trace, thresholds)); },
                    [this, tracking, order_id](Agent& a, const TaskStatus& st) {
                      Value report = st.state == TaskStatus::State::done
                                         ? st.result
                                         : Value{{"error", st.error}};
                      {
                        std::lock_guard lock(mutex_);
                        reports_[tracking] = report;
                      }
                      a.notify("report", Value{{"tracking_number", tracking}, {"order_id", order_id},
                                               {"report", report}});
                      report_status(a, tracking, report);
                    });
}

void CarrierSkill::report_status(Agent& agent, const std::string& tracking, const Value& report) {
  std::string order_id;
  {
    std::lock_guard lock(mutex_);
    order_id = replays_.at(tracking).job().order_id;
  }
  agent.rr_request(*this, local_address(logistics_of_[tracking]), Method::post,
                   Value{{"type", "delivery-status"},
                         {"order_id", order_id},
                         {"tracking_number", tracking},
                         {"status", "delivered"},
                         {"report", report}},
                   kLogisticsOntology);
}

std::optional<Value> CarrierSkill::delivery(const std::string& tracking) const {
  std::lock_guard lock(mutex_);
  const auto it = replays_.find(tracking);
  if (it == replays_.end()) return std::nullopt;
  Value v = to_value(it->second.job());
  v["emitted"] = it->second.emitted();
  if (it->second.emitted() > 0) {
    v["last_point"] = to_value(it->second.job().trace.points[it->second.emitted() - 1]);
  }
  v["report_ready"] = reports_.count(tracking) != 0;
  return v;
}

std::optional<Value> CarrierSkill::report(const std::string& tracking) const {
  std::lock_guard lock(mutex_);
  if (const auto it = reports_.find(tracking); it != reports_.end()) return it->second;
  if (replays_.count(tracking) != 0) return Value();
  return std::nullopt;
}

std::vector<std::string> CarrierSkill::tracking_numbers() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [t, _] : replays_) out.push_back(t);
  return out;
}

Value CarrierSkill::status() const {
  std::lock_guard lock(mutex_);
  std::size_t active = 0;
  for (const auto& [_, r] : replays_) {
    if (r.job().status == DeliveryStatus::in_transit) ++active;
  }
  return Value{{"deliveries", replays_.size()}, {"in_transit", active}, {"reports", reports_.size()}};
}

// -- admin --------------------------------------------------------------------------------------

void AdminSkill::refresh(Agent& agent) {
  if (!pending_.empty()) return;  // a round is already running
  {
    std::lock_guard lock(mutex_);
    complete_ = false;
  }
  entries_ = Value::object();
  auto& system = agent.system();
  for (const auto& name : system.agent_names()) {
    if (name == agent.name()) continue;
    const Agent* other = system.find(name);
    if (other == nullptr || other->config().type == "directory") continue;
    if (!system.is_live(name)) {
      entries_[name] = Value{{"name", name}, {"type", other->config().type}, {"live", false}, {"reachable", false}};
      continue;
    }
    const auto conv = agent.rr_request(*this, other->address(), Method::get, Value{{"type", "status-request"}},
                                       kAdminOntology);
    pending_[conv] = name;
  }
  finish_if_complete(agent);
}

void AdminSkill::on_event(Agent& agent, const std::string& conversation, const DialogueEvent& event) {
  const auto it = pending_.find(conversation);
  if (it == pending_.end()) return;
  if (event.kind == "undeliverable") return;  // the request timer reports it
  const auto name = it->second;
  pending_.erase(it);
  if (event.kind == "response" && type_of(event.detail) == "status") {
    Value entry = event.detail.value("agent", Value::object());
    entry["reachable"] = true;
    entries_[name] = entry;
  } else {
    const Agent* other = agent.system().find(name);
    entries_[name] = Value{{"name", name},
                           {"type", other != nullptr ? other->config().type : std::string()},
                           {"live", agent.system().is_live(name)},
                           {"reachable", false}};
  }
  finish_if_complete(agent);
}

void AdminSkill::finish_if_complete(Agent& agent) {
  if (!pending_.empty()) return;
  Value list = Value::array();
  for (const auto& [_, v] : entries_.items()) list.push_back(v);
  {
    std::lock_guard lock(mutex_);
    overview_ = list;
    complete_ = true;
    ++generation_;
  }
  agent.notify("status", Value{{"kind", "overview"}, {"agents", list}});
}

Value AdminSkill::overview() const {
  std::lock_guard lock(mutex_);
  return overview_;
}

bool AdminSkill::complete() const {
  std::lock_guard lock(mutex_);
  return complete_;
}

std::uint64_t AdminSkill::generation() const {
  std::lock_guard lock(mutex_);
  return generation_;
}

Value AdminSkill::status() const {
  std::lock_guard lock(mutex_);
  return Value{{"generation", generation_}, {"agents", overview_.size()}};
}

// -- factories -------------------------------------------------------------------------------------

void register_skills(System& system, const std::filesystem::path& base_dir) {
  for (const char* type : {"supplier", "wholesaler", "retailer"}) {
    system.add_skill_factory(type, [t = std::string(type)](const Value& params) {
      return std::make_unique<TraderSkill>(TraderConfig::from_params(t, params));
    });
  }
  system.add_skill_factory("logistics", [](const Value& params) {
    return std::make_unique<LogisticsSkill>(LogisticsConfig::from_params(params));
  });
  system.add_skill_factory("3pl", [base_dir](const Value& params) {
    return std::make_unique<CarrierSkill>(CarrierConfig::from_params(params, base_dir));
  });
  system.add_skill_factory("admin", [](const Value&) { return std::make_unique<AdminSkill>(); });
  system.add_skill_factory("directory", [base_dir](const Value& params) {
    std::optional<std::filesystem::path> snapshot;
    if (params.is_object() && params.contains("snapshot")) {
      std::filesystem::path p = params["snapshot"].get<std::string>();
      snapshot = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    }
    return std::make_unique<DirectorySkill>(snapshot);
  });
}

}  // namespace a2sc
