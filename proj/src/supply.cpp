#include "a2sc/supply.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "a2sc/error.hpp"

namespace a2sc {

std::string_view to_string(OrderStatus s) noexcept {
  switch (s) {
    case OrderStatus::draft: return "draft";
    case OrderStatus::proposed: return "proposed";
    case OrderStatus::accepted: return "accepted";
    case OrderStatus::rejected: return "rejected";
    case OrderStatus::fulfilled: return "fulfilled";
  }
  return "?";
}

namespace {

OrderStatus parse_status(const std::string& s) {
  for (const auto st : {OrderStatus::draft, OrderStatus::proposed, OrderStatus::accepted, OrderStatus::rejected,
                        OrderStatus::fulfilled}) {
    if (to_string(st) == s) return st;
  }
  throw Error(Errc::validation_error, "unknown order status '" + s + "'");
}

AgentAddress address_from(const Value& v) {
  if (v.is_string()) return local_address(v.get<std::string>());
  return AgentAddress{v.at("name").get<std::string>(), v.at("endpoint").get<std::string>()};
}

Value address_value(const AgentAddress& a) { return Value{{"name", a.name}, {"endpoint", a.endpoint}}; }

double best_eta(const Proposal& p) {
  if (p.delivery_options.empty()) return std::numeric_limits<double>::infinity();
  const auto it = std::min_element(p.delivery_options.begin(), p.delivery_options.end(),
                                   [](const auto& a, const auto& b) { return a.eta < b.eta; });
  return static_cast<double>(it->eta.count());
}

template <typename F>
auto wrap_json(const char* what, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::validation_error, std::string(what) + ": " + e.what());
  }
}

}  // namespace

bool can_transition(OrderStatus from, OrderStatus to) noexcept {
  switch (from) {
    case OrderStatus::draft: return to == OrderStatus::proposed;
    case OrderStatus::proposed: return to == OrderStatus::accepted || to == OrderStatus::rejected;
    case OrderStatus::accepted: return to == OrderStatus::fulfilled;
    default: return false;
  }
}

void PurchaseOrder::advance(OrderStatus to) {
  if (!can_transition(status, to)) {
    throw Error(Errc::invalid_state, "order " + id + ": " + std::string(to_string(status)) + " -> " +
                                         std::string(to_string(to)));
  }
  status = to;
}

void validate(const PurchaseOrder& po) {
  if (!(po.quantity > 0.0) || !std::isfinite(po.quantity)) {
    throw Error(Errc::validation_error, "order quantity must be > 0");
  }
  if (!(po.unit_price >= 0.0) || !std::isfinite(po.unit_price)) {
    throw Error(Errc::validation_error, "order unit_price must be >= 0");
  }
  if (po.product.empty()) throw Error(Errc::validation_error, "order product is empty");
  if (!valid(po.delivery_address)) throw Error(Errc::validation_error, "delivery address out of range");
}

Value to_value(const PurchaseOrder& po) {
  Value v{{"order_id", po.id},
          {"buyer", address_value(po.buyer)},
          {"seller", address_value(po.seller)},
          {"product", po.product},
          {"quantity", po.quantity},
          {"unit_price", po.unit_price},
          {"delivery_address", to_value(po.delivery_address)},
          {"status", to_string(po.status)}};
  if (po.delivery_option) v["delivery_option"] = *po.delivery_option;
  return v;
}

PurchaseOrder order_from_value(const Value& v) {
  return wrap_json("purchase order", [&] {
    PurchaseOrder po;
    po.id = v.at("order_id").get<std::string>();
    if (v.contains("buyer")) po.buyer = address_from(v["buyer"]);
    if (v.contains("seller")) po.seller = address_from(v["seller"]);
    po.product = v.at("product").get<std::string>();
    po.quantity = v.at("quantity").get<double>();
    po.unit_price = v.at("unit_price").get<double>();
    po.delivery_address = geo_from_value(v.at("delivery_address"));
    if (v.contains("delivery_option") && !v["delivery_option"].is_null()) {
      po.delivery_option = v["delivery_option"].get<std::string>();
    }
    if (v.contains("status")) po.status = parse_status(v["status"].get<std::string>());
    validate(po);
    return po;
  });
}

Value to_value(const DeliveryOption& o) {
  return Value{{"id", o.id}, {"carrier", address_value(o.carrier)}, {"rate", o.rate}, {"eta_ms", o.eta.count()}};
}

DeliveryOption option_from_value(const Value& v) {
  return wrap_json("delivery option", [&] {
    DeliveryOption o;
    o.id = v.at("id").get<std::string>();
    o.carrier = address_from(v.at("carrier"));
    o.rate = v.at("rate").get<double>();
    o.eta = Duration{v.at("eta_ms").get<std::int64_t>()};
    if (!(o.rate >= 0.0) || o.eta.count() <= 0) throw Error(Errc::validation_error, "option needs rate >= 0, eta > 0");
    return o;
  });
}

Value to_value(const Proposal& p) {
  Value opts = Value::array();
  for (const auto& o : p.delivery_options) opts.push_back(to_value(o));
  return Value{{"proposer", address_value(p.proposer)},
               {"order_id", p.order_id},
               {"unit_price", p.unit_price},
               {"quantity", p.quantity},
               {"delivery_options", opts}};
}

Proposal proposal_from_value(const Value& v) {
  return wrap_json("proposal", [&] {
    Proposal p;
    p.proposer = address_from(v.at("proposer"));
    p.order_id = v.at("order_id").get<std::string>();
    p.unit_price = v.at("unit_price").get<double>();
    p.quantity = v.at("quantity").get<double>();
    if (v.contains("delivery_options")) {
      for (const auto& o : v["delivery_options"]) p.delivery_options.push_back(option_from_value(o));
    }
    if (!(p.quantity > 0.0)) throw Error(Errc::validation_error, "proposal quantity must be > 0");
    return p;
  });
}

void validate(const InventoryRecord& inv) {
  if (inv.on_hand < 0.0) throw Error(Errc::validation_error, inv.product + ": on_hand below zero");
  if (inv.reserved < 0.0 || inv.reserved > inv.on_hand) {
    throw Error(Errc::validation_error, inv.product + ": reserved outside [0, on_hand]");
  }
  if (!(inv.reorder_quantity > 0.0)) throw Error(Errc::validation_error, inv.product + ": reorder_quantity must be > 0");
}

Value to_value(const InventoryRecord& inv) {
  return Value{{"product", inv.product},
               {"on_hand", inv.on_hand},
               {"reserved", inv.reserved},
               {"reorder_point", inv.reorder_point},
               {"reorder_quantity", inv.reorder_quantity}};
}

InventoryRecord inventory_from_value(const Value& v) {
  return wrap_json("inventory", [&] {
    InventoryRecord inv;
    inv.product = v.at("product").get<std::string>();
    inv.on_hand = v.value("on_hand", 0.0);
    inv.reserved = v.value("reserved", 0.0);
    inv.reorder_point = v.value("reorder_point", 0.0);
    inv.reorder_quantity = v.value("reorder_quantity", 1.0);
    validate(inv);
    return inv;
  });
}

Assessment assess_order(const PurchaseOrder& po, InventoryRecord& inv, const StrategyParams& s) {
  if (po.product != inv.product) {
    throw Error(Errc::product_mismatch, "order for " + po.product + ", inventory holds " + inv.product);
  }
  if (inv.free() < po.quantity) return Reject{"insufficient-stock"};
  if (po.unit_price < s.expected_price) return Reject{"price-below-expected"};
  inv.reserved += po.quantity;
  return Accept{};
}

Proposal evaluate_proposals(const std::vector<Proposal>& props, const StrategyParams& s) {
  const Proposal* best = nullptr;
  auto key = [](const Proposal& p) { return std::make_tuple(p.unit_price, best_eta(p), p.proposer.name); };
  for (const auto& p : props) {
    if (p.unit_price > s.max_price) continue;
    if (best == nullptr || key(p) < key(*best)) best = &p;
  }
  if (best == nullptr) throw Error(Errc::no_acceptable_proposal, "no proposal within max price");
  return *best;
}

DeliveryOption select_delivery_option(const std::vector<DeliveryOption>& opts, const StrategyParams&) {
  if (opts.empty()) throw Error(Errc::validation_error, "no delivery options");
  return *std::min_element(opts.begin(), opts.end(), [](const auto& a, const auto& b) {
    return std::tie(a.rate, a.eta, a.carrier.name, a.id) < std::tie(b.rate, b.eta, b.carrier.name, b.id);
  });
}

AgentAddress select_3pl(const std::vector<AgentAddress>& eligible, std::mt19937_64& rng) {
  if (eligible.empty()) throw Error(Errc::validation_error, "no eligible 3PL");
  std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
  return eligible[pick(rng)];
}

InventoryRecord apply_inbound(const InventoryRecord& inv, double qty) {
  if (!(qty > 0.0)) throw Error(Errc::validation_error, "inbound quantity must be > 0");
  auto out = inv;
  out.on_hand += qty;
  return out;
}

InventoryRecord apply_outbound(const InventoryRecord& inv, double qty) {
  if (!(qty > 0.0)) throw Error(Errc::validation_error, "outbound quantity must be > 0");
  if (qty > inv.on_hand) throw Error(Errc::insufficient_stock, inv.product + ": outbound exceeds on_hand");
  auto out = inv;
  out.on_hand -= qty;
  out.reserved = std::max(0.0, out.reserved - qty);
  out.reserved = std::min(out.reserved, out.on_hand);
  return out;
}

InventoryRecord release(const InventoryRecord& inv, double qty) {
  auto out = inv;
  out.reserved = std::max(0.0, out.reserved - qty);
  return out;
}

std::optional<PurchaseOrder> check_replenishment(const InventoryRecord& inv, const StrategyParams& s,
                                                 bool in_flight) {
  if (in_flight || inv.free() > inv.reorder_point) return std::nullopt;
  PurchaseOrder po;
  po.product = inv.product;
  po.quantity = inv.reorder_quantity;
  po.unit_price = s.max_price;
  return po;
}

Query vendor_query(const std::string& kind, const std::string& product, const StrategyParams& s) {
  Query q;
  q.kind = kind;
  q.constraints.push_back(Constraint{"product", Equals{product}});
  if (s.min_performance) q.constraints.push_back(Constraint{"performance", InRange{*s.min_performance, 1.0}});
  if (s.near && s.within_km) q.constraints.push_back(Constraint{"location", WithinKm{*s.near, *s.within_km}});
  return q;
}

}  // namespace a2sc
