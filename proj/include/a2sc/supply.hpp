#pragma once

// Supply-chain domain model and the pure decision functions the agent
// skills call: order assessment, proposal and delivery-option selection,
// 3PL choice and inventory movements.

#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "a2sc/discovery.hpp"
#include "a2sc/messaging.hpp"

namespace a2sc {

enum class OrderStatus { draft, proposed, accepted, rejected, fulfilled };

std::string_view to_string(OrderStatus s) noexcept;

/// draft->proposed->{accepted,rejected}, accepted->fulfilled.
bool can_transition(OrderStatus from, OrderStatus to) noexcept;

struct PurchaseOrder {
  std::string id;
  AgentAddress buyer;
  AgentAddress seller;
  std::string product;
  double quantity = 0.0;    // kg
  double unit_price = 0.0;  // currency/kg
  GeoPoint delivery_address;
  std::optional<std::string> delivery_option;
  OrderStatus status = OrderStatus::draft;

  /// Throws Error{invalid_state} on an illegal status change.
  void advance(OrderStatus to);
};

/// Throws Error{validation_error} unless quantity > 0 and unit_price >= 0.
void validate(const PurchaseOrder& po);
Value to_value(const PurchaseOrder& po);
PurchaseOrder order_from_value(const Value& v);

struct DeliveryOption {
  std::string id;
  AgentAddress carrier;
  double rate = 0.0;
  Duration eta{0};

  bool operator==(const DeliveryOption&) const = default;
};

Value to_value(const DeliveryOption& o);
DeliveryOption option_from_value(const Value& v);

struct Proposal {
  AgentAddress proposer;
  std::string order_id;
  double unit_price = 0.0;
  double quantity = 0.0;
  std::vector<DeliveryOption> delivery_options;

  bool operator==(const Proposal&) const = default;
};

Value to_value(const Proposal& p);
Proposal proposal_from_value(const Value& v);

struct InventoryRecord {
  std::string product;
  double on_hand = 0.0;
  double reserved = 0.0;
  double reorder_point = 0.0;
  double reorder_quantity = 1.0;

  double free() const noexcept { return on_hand - reserved; }
  bool operator==(const InventoryRecord&) const = default;
};

/// Throws Error{validation_error} when an invariant is broken.
void validate(const InventoryRecord& inv);
Value to_value(const InventoryRecord& inv);
InventoryRecord inventory_from_value(const Value& v);

struct StrategyParams {
  double expected_price = 0.0;  // sell side
  double max_price = 0.0;       // buy side
  std::optional<double> min_performance;
  std::optional<GeoPoint> near;
  std::optional<double> within_km;
};

// -- decisions ----------------------------------------------------------------------

struct Reject {
  std::string reason;  // insufficient-stock | price-below-expected
  bool operator==(const Reject&) const = default;
};

struct Accept {
  bool operator==(const Accept&) const = default;
};

using Assessment = std::variant<Accept, Reject>;

/// Accepts iff free stock covers the order and the price reaches the
/// expectation; an accepted quantity is reserved in `inv`.
/// Throws Error{product_mismatch}.
Assessment assess_order(const PurchaseOrder& po, InventoryRecord& inv, const StrategyParams& s);

/// Cheapest proposal within max_price; ties by best offered eta, then by
/// proposer name. Throws Error{no_acceptable_proposal}.
Proposal evaluate_proposals(const std::vector<Proposal>& props, const StrategyParams& s);

/// Minimum by (rate, eta, carrier name, id). Throws Error{validation_error}
/// on an empty list.
DeliveryOption select_delivery_option(const std::vector<DeliveryOption>& opts, const StrategyParams& s = {});

/// Uniform draw. Throws Error{validation_error} on an empty list.
AgentAddress select_3pl(const std::vector<AgentAddress>& eligible, std::mt19937_64& rng);

InventoryRecord apply_inbound(const InventoryRecord& inv, double qty);
/// Throws Error{insufficient_stock}. Releases up to `qty` of the reservation.
InventoryRecord apply_outbound(const InventoryRecord& inv, double qty);
/// Drops a reservation without moving goods.
InventoryRecord release(const InventoryRecord& inv, double qty);

/// Draft order of reorder_quantity when free stock is at or below the
/// reorder point and nothing is already in flight.
std::optional<PurchaseOrder> check_replenishment(const InventoryRecord& inv, const StrategyParams& s,
                                                 bool in_flight);

/// Supplier query honouring the vendor constraints in `s`.
Query vendor_query(const std::string& kind, const std::string& product, const StrategyParams& s);

}  // namespace a2sc
