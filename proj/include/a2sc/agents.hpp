#pragma once

// The concrete supply-chain agents as skills.
//
// TraderSkill covers the three trading entities. A supplier only sells,
// a retailer only buys and a wholesaler does both, sharing one inventory:
//
//   sell side  contract-net participant; assess_order, propose, dispatch,
//              book delivery through logistics, inform on delivery
//   buy side   directory search, contract-net initiator, evaluate and
//              award, inbound on delivery, receipt
//
// LogisticsSkill quotes delivery options from 3PL quotes and subcontracts
// bookings; CarrierSkill is a 3PL replaying traces; AdminSkill polls every
// agent for the overview.

#include <filesystem>
#include <mutex>
#include <optional>
#include <set>

#include "a2sc/logistics.hpp"
#include "a2sc/runtime.hpp"
#include "a2sc/supply.hpp"

namespace a2sc {

inline constexpr const char* kMeatTrade = "meat-trade";
inline constexpr const char* kLogisticsOntology = "logistics";
inline constexpr const char* kAdminOntology = "admin";
inline constexpr const char* kDirectoryOntology = "oef";

/// Publishes a "notification" event.
void notify_progress(Agent& agent, const std::string& process, const std::string& message,
                     const std::string& level = "info");

// -- trading entities -------------------------------------------------------------------

struct SellConfig {
  std::string kind;              // service kind registered, e.g. meat-supply
  double expected_price = 0.0;   // minimum acceptable price; also the quoted price
  bool quote_delivery = false;   // fetch options from logistics per order (else predetermined)
};

struct BuyConfig {
  std::string kind;  // service kind searched, e.g. meat-supply
  StrategyParams strategy;
  bool choose_delivery = false;  // pick among offered delivery options
  bool auto_replenish = false;   // run check_replenishment after every sale
};

struct TraderConfig {
  std::string type;  // supplier | wholesaler | retailer
  std::string product = "beef";
  GeoPoint location;
  InventoryRecord inventory;
  std::optional<SellConfig> sell;
  std::optional<BuyConfig> buy;
  std::string logistics = "logistics";

  /// Reads the params object of an agent config; defaults depend on `type`.
  static TraderConfig from_params(const std::string& type, const Value& params);
};

class TraderSkill final : public Skill {
 public:
  explicit TraderSkill(TraderConfig cfg);

  std::string name() const override { return cfg_.type; }
  std::vector<std::string> protocols() const override;
  bool accepts(const Envelope& opening) const override;
  void setup(Agent& agent) override;
  void on_event(Agent& agent, const std::string& conversation, const DialogueEvent& event) override;
  Value status() const override;

  /// Opens a procurement process (buy side). Runs on the agent loop.
  /// `process` is an id already opened in the ledger, or empty to open one.
  /// Returns the process id.
  std::string launch(Agent& agent, double quantity, std::optional<StrategyParams> strategy = std::nullopt,
                     const std::string& process = "");

  const TraderConfig& config() const noexcept { return cfg_; }

  // Thread-safe views.
  InventoryRecord inventory() const;
  double in_transit_out() const;
  bool replenishment_in_flight() const;
  std::optional<DeliveryOption> predetermined_option() const;

 private:
  struct Purchase {
    std::string process;
    PurchaseOrder order;
    StrategyParams strategy;
    std::string cn;  // contract-net conversation once started
    std::vector<std::string> refusals;
    bool replenishment = false;
  };

  struct Sale {
    PurchaseOrder order;
    std::string cn;
    std::string stage = "assessed";  // assessed, proposed, dispatched, delivered, done, dropped
    std::string tracking;
  };

  void set_inventory(Agent& agent, const InventoryRecord& next, const std::string& reason, double delta,
                     const std::string& order);
  void close_purchase(Agent& agent, const std::string& cn_or_search, bool ok, const std::string& outcome,
                      const Value& detail = Value::object());
  void maybe_replenish(Agent& agent);

  void on_buy_event(Agent& agent, const std::string& conversation, const DialogueEvent& event);
  void on_sell_event(Agent& agent, const std::string& conversation, const DialogueEvent& event);
  void on_cfp(Agent& agent, const std::string& conversation, const Value& content);
  void on_delivery_status(Agent& agent, const std::string& conversation, const Value& content);
  void drop_sale(Agent& agent, const std::string& conversation, const std::string& why);

  TraderConfig cfg_;

  std::map<std::string, Purchase> searches_;          // directory conversation -> purchase
  std::map<std::string, Purchase> purchases_;         // contract-net conversation -> purchase
  std::map<std::string, Sale> sales_;                 // contract-net conversation -> sale
  std::map<std::string, std::string> option_requests_;  // rr conversation -> sale conversation
  std::map<std::string, std::string> bookings_;         // rr conversation -> sale conversation
  std::string predetermined_request_;

  mutable std::mutex mutex_;  // guards the members below
  InventoryRecord inventory_;
  double in_transit_out_ = 0.0;
  bool replenishing_ = false;
  std::optional<DeliveryOption> predetermined_;
};

// -- logistics company ------------------------------------------------------------------

struct LogisticsConfig {
  double margin = 0.1;  // markup over the dearest 3PL quote
  std::string carrier_kind = "3pl-fulfilment";

  static LogisticsConfig from_params(const Value& params);
};

class LogisticsSkill final : public Skill {
 public:
  explicit LogisticsSkill(LogisticsConfig cfg);

  std::string name() const override { return "logistics"; }
  std::vector<std::string> protocols() const override { return {std::string(kRequestResponse)}; }
  bool accepts(const Envelope& opening) const override;
  void on_event(Agent& agent, const std::string& conversation, const DialogueEvent& event) override;
  Value status() const override;

  /// Builds per-service-level options from 3PL quote contents: dearest rate
  /// times (1 + margin), slowest eta, carrier = `self`. Sorted by id.
  static std::vector<DeliveryOption> build_options(const std::map<std::string, Value>& quotes,
                                                   const AgentAddress& self, double margin);

 private:
  struct Job {
    enum class Purpose { options, booking };
    Purpose purpose = Purpose::options;
    std::string server_conversation;  // request being answered
    Value request;
    std::set<std::string> waiting;          // quote conversations outstanding
    std::map<std::string, Value> quotes;    // 3PL name -> quote content
    std::map<std::string, AgentAddress> carriers;
    std::string search_conversation;
    std::string booking_conversation;
  };

  void start_job(Agent& agent, const std::string& conversation, const Value& request, Job::Purpose purpose);
  void on_search(Agent& agent, Job& job, const Value& response);
  void finish_quotes(Agent& agent, const std::string& job_id);
  void fail_job(Agent& agent, const std::string& job_id, const std::string& code, const std::string& message);

  LogisticsConfig cfg_;
  std::map<std::string, Job> jobs_;                  // keyed by server conversation
  std::map<std::string, std::string> job_of_;        // client conversation -> job
  std::map<std::string, Value> bookings_;            // tracking -> {booker, order_id, carrier}
  std::map<std::string, std::string> forwards_;      // forward conversation -> tracking
  std::size_t alerts_ = 0;
};

// -- 3PL --------------------------------------------------------------------------------

struct ServiceLevel {
  std::string id;             // standard, express, ...
  double rate_multiplier = 1.0;
  double eta_factor = 1.0;
};

struct CarrierConfig {
  double base_rate = 20.0;    // currency per delivery
  double rate_per_km = 1.0;   // currency per km
  double speed_kmh = 30.0;    // for eta quotes
  Duration handling{3'600'000};
  std::vector<ServiceLevel> services{{"standard", 1.0, 1.0}, {"express", 1.6, 0.5}};
  std::vector<std::filesystem::path> traces;
  Thresholds thresholds;
  GeoPoint location{52.2053, 0.1218};

  static CarrierConfig from_params(const Value& params, const std::filesystem::path& base_dir = {});
};

class CarrierSkill final : public Skill {
 public:
  explicit CarrierSkill(CarrierConfig cfg);
  /// Uses already loaded traces instead of reading `cfg.traces`.
  CarrierSkill(CarrierConfig cfg, std::vector<Trace> traces);

  std::string name() const override { return "3pl"; }
  std::vector<std::string> protocols() const override { return {std::string(kRequestResponse)}; }
  bool accepts(const Envelope& opening) const override;
  void setup(Agent& agent) override;
  void on_event(Agent& agent, const std::string& conversation, const DialogueEvent& event) override;
  Value status() const override;

  /// Quote content for a journey.
  Value quote(const std::string& carrier, GeoPoint origin, GeoPoint destination) const;

  // Thread-safe views.
  std::optional<Value> delivery(const std::string& tracking) const;
  /// nullopt: unknown; null Value: known but not delivered yet.
  std::optional<Value> report(const std::string& tracking) const;
  std::vector<std::string> tracking_numbers() const;

 private:
  void step(Agent& agent, const std::string& tracking);
  void report_status(Agent& agent, const std::string& tracking, const Value& report);

  CarrierConfig cfg_;
  std::vector<Trace> traces_;
  TrackingNumbers tracking_;
  std::size_t booked_ = 0;
  std::map<std::string, std::string> logistics_of_;  // tracking -> agent to report to

  mutable std::mutex mutex_;
  std::map<std::string, DeliveryReplay> replays_;
  std::map<std::string, Value> reports_;
};

// -- admin ------------------------------------------------------------------------------

class AdminSkill final : public Skill {
 public:
  std::string name() const override { return "admin"; }
  void on_event(Agent& agent, const std::string& conversation, const DialogueEvent& event) override;
  Value status() const override;

  /// Sends one status get to every other agent (directories excluded).
  /// Completes when each has answered, timed out or proved unreachable.
  void refresh(Agent& agent);

  /// Thread-safe. Entries sorted by agent name.
  Value overview() const;
  bool complete() const;
  std::uint64_t generation() const;

 private:
  void finish_if_complete(Agent& agent);

  std::map<std::string, std::string> pending_;  // conversation -> agent name
  Value entries_ = Value::object();

  mutable std::mutex mutex_;
  Value overview_ = Value::array();
  bool complete_ = true;
  std::uint64_t generation_ = 0;
};

/// Registers the factories: supplier, wholesaler, retailer, logistics, 3pl,
/// admin, directory. Trace paths in 3pl params resolve against `base_dir`.
void register_skills(System& system, const std::filesystem::path& base_dir = {});

}  // namespace a2sc
