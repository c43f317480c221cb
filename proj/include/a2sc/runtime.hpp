#pragma once

// Agent shell and in-process router.
//
// Each agent owns a mailbox, a timer queue and a dialogue table, and runs one
// sequential event loop: handlers, behaviours and task completions of the
// same agent never overlap. With a scaled or real clock every agent gets its
// own thread; with a virtual clock the System drives all agents from the
// caller's thread, which makes runs reproducible.

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "a2sc/clock.hpp"
#include "a2sc/discovery.hpp"
#include "a2sc/messaging.hpp"
#include "a2sc/ontology.hpp"
#include "a2sc/protocol.hpp"

namespace a2sc {

class Agent;
class System;

// -- skills ----------------------------------------------------------------------

struct Behaviour {
  enum class Kind { one_shot, periodic };

  std::string name;
  Kind kind = Kind::one_shot;
  Duration interval{0};  // periodic only
  std::function<void(Agent&)> action;
  Timestamp next_due = 0;  // 0 = due at start
};

/// A coherent block of capability: reactive handlers (dialogue events for the
/// protocols it registers), proactive behaviours added in setup(), a strategy
/// and a skill-local model.
class Skill {
 public:
  virtual ~Skill() = default;

  virtual std::string name() const = 0;

  /// Protocols for which this skill may open participant/server dialogues.
  virtual std::vector<std::string> protocols() const { return {}; }

  /// Asked for each fresh cfp/request of a registered protocol.
  virtual bool accepts(const Envelope& /*opening*/) const { return true; }

  virtual void setup(Agent& /*agent*/) {}

  virtual void on_event(Agent& agent, const std::string& conversation, const DialogueEvent& event) = 0;

  /// Snapshot exposed to the admin portal.
  virtual Value status() const { return Value::object(); }
};

using SkillFactory = std::function<std::unique_ptr<Skill>(const Value& params)>;

// -- tasks -----------------------------------------------------------------------

struct TaskStatus {
  enum class State { running, done, failed };

  State state = State::running;
  Value result;
  std::string error;
};

using TaskId = std::uint64_t;
using ProgressFn = std::function<void(Value)>;
using TaskWork = std::function<Value(const ProgressFn&)>;
using TaskDone = std::function<void(Agent&, const TaskStatus&)>;
using TaskProgress = std::function<void(Agent&, const Value&)>;

// -- system events ------------------------------------------------------------------

/// Everything observable leaves the system through these: envelopes routed
/// between agents, agent notifications, telemetry, reports, process status.
struct SystemEvent {
  std::string kind;  // envelope, notification, location, sensor, alert, report,
                     // status, inventory, violation, orphan, undeliverable
  std::string source;
  Value payload = Value::object();
  std::optional<Envelope> envelope;
  Timestamp time = 0;
};

using EventListener = std::function<void(const SystemEvent&)>;

// -- processes -------------------------------------------------------------------

struct ProcessRecord {
  std::string id;
  std::string kind;  // replenish | wholesale
  std::string initiator;
  std::string status = "running";  // running | fulfilled | failed
  std::string outcome;             // fulfilled or an error code
  Value detail = Value::object();

  bool terminal() const { return status != "running"; }
};

/// Thread-safe register of launched procurement processes.
class ProcessLedger {
 public:
  std::string open(const std::string& kind, const std::string& initiator, Value detail = Value::object());
  void close(const std::string& id, bool fulfilled, const std::string& outcome, const Value& detail = Value());
  void annotate(const std::string& id, const std::string& key, const Value& value);
  std::optional<ProcessRecord> get(const std::string& id) const;
  std::vector<ProcessRecord> all() const;
  bool all_terminal() const;

  void set_listener(std::function<void(const ProcessRecord&)> fn);

 private:
  mutable std::mutex mutex_;
  std::map<std::string, ProcessRecord> records_;
  std::vector<std::string> order_;
  std::uint64_t next_ = 1;
  std::function<void(const ProcessRecord&)> listener_;
};

Value to_value(const ProcessRecord& p);

// -- agents ----------------------------------------------------------------------

struct AgentConfig {
  AgentAddress address;
  std::string type;                     // supplier, wholesaler, ...
  std::vector<std::string> skills;      // names resolved through System::add_skill_factory
  Value params = Value::object();       // strategy parameters, passed to each skill factory
  std::optional<std::string> discovery; // directory agent name; empty = admin-only mode
  std::vector<Value> services;          // descriptions registered at start (owner filled in)
  ClockSpec clock;
  std::uint64_t seed = 0;               // 0 = derived from the system seed and the name
};

struct Timeouts {
  Duration cfp{10'000};
  Duration request{5'000};
  Duration award{30'000};
};

class Agent {
 public:
  Agent(System& system, AgentConfig cfg, std::vector<std::unique_ptr<Skill>> skills, std::uint64_t seed);
  ~Agent();

  Agent(const Agent&) = delete;
  Agent& operator=(const Agent&) = delete;

  const AgentAddress& address() const noexcept { return cfg_.address; }
  const AgentConfig& config() const noexcept { return cfg_; }
  const std::string& name() const noexcept { return cfg_.address.name; }
  Timestamp now() const;
  std::mt19937_64& rng() noexcept { return rng_; }
  const Timeouts& timeouts() const noexcept;
  System& system() noexcept { return system_; }

  /// Routes an envelope; false if the receiver is unknown or stopped.
  bool send(const Envelope& e);
  void notify(const std::string& kind, Value payload);

  using TimerId = std::uint64_t;
  TimerId schedule(Timestamp due, std::function<void(Agent&)> fn);
  void cancel(TimerId id);
  void add_behaviour(Behaviour b);

  TaskId submit_task(TaskWork work, TaskDone on_done, TaskProgress on_progress = {});
  std::optional<TaskStatus> poll_task(TaskId id) const;

  // Dialogue driving. Conversation ids are "<agent>/<n>".
  std::string new_conversation() { return conversations_.next(); }
  std::string cn_start(const Skill& owner, const std::vector<AgentAddress>& participants, const Value& cfp,
                       std::optional<Duration> deadline = std::nullopt, const std::string& ontology = "meat-trade");
  void cn_award(const std::string& conversation, const std::string& winner, const Value& accept,
                const Value& reject);
  void cn_decline(const std::string& conversation, const Value& reject);
  void cn_complete(const std::string& conversation, const Value& receipt);
  void cn_propose(const std::string& conversation, const Value& content);
  void cn_refuse(const std::string& conversation, const Value& content);
  void cn_inform(const std::string& conversation, const Value& content);
  void cn_fail(const std::string& conversation, const Value& content);
  std::string rr_request(const Skill& owner, const AgentAddress& target, Method method, const Value& content,
                         const std::string& ontology, std::optional<Duration> timeout = std::nullopt,
                         const std::string& protocol = std::string(kRequestResponse));
  void rr_respond(const std::string& conversation, const Value& content);

  const ContractNetDialogue* contract_net(const std::string& conversation) const;
  const RequestResponseDialogue* request_response(const std::string& conversation) const;
  std::size_t open_dialogues() const;

  /// Directory agent, if configured.
  std::optional<AgentAddress> discovery() const;
  const std::map<std::string, std::string>& registrations() const noexcept { return registrations_; }

  Skill* skill(const std::string& name) const;
  template <typename T>
  T* skill_as() const {
    for (const auto& s : skills_) {
      if (auto* p = dynamic_cast<T*>(s.get())) return p;
    }
    return nullptr;
  }

  Value status() const;
  bool live() const noexcept;

 private:
  friend class System;

  using Internal = std::function<void(Agent&)>;
  using Event = std::variant<Envelope, Internal>;

  struct Timer {
    Timestamp due;
    std::uint64_t seq;
    std::function<void(Agent&)> fn;
  };

  // Mailbox side; callable from any thread.
  void enqueue(Event ev);
  bool mailbox_empty() const;

  // Loop side.
  bool process_one();
  void dispatch(const Envelope& e);
  void apply(const std::string& conversation, const Dialogue& next, const Actions& actions);
  void feed_timer(const std::string& conversation);
  std::optional<Timestamp> next_due() const;
  bool fire_one_due(Timestamp now);
  void fire_due(Timestamp now);
  void start();
  void run_loop(std::stop_token stop);
  void request_stop();
  void register_services();
  void on_runtime_event(const std::string& conversation, const DialogueEvent& event);
  std::size_t registered_count() const;

  System& system_;
  AgentConfig cfg_;
  std::vector<std::unique_ptr<Skill>> skills_;
  std::mt19937_64 rng_;
  ConversationIds conversations_;
  DialogueTable dialogues_;
  std::map<std::pair<Timestamp, std::uint64_t>, Timer> timers_;
  std::map<TimerId, std::pair<Timestamp, std::uint64_t>> timer_index_;
  std::uint64_t timer_seq_ = 0;
  std::map<std::string, std::string> registrations_;  // kind -> registration id
  std::map<std::string, std::string> pending_registrations_;  // conversation -> kind

  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<Event> mailbox_;
  bool busy_ = false;
  bool stopped_ = false;
  bool timers_dirty_ = false;
  std::map<TaskId, TaskStatus> tasks_;
  TaskId next_task_ = 1;

  std::jthread thread_;
};

// -- background pool -------------------------------------------------------------------

class TaskPool {
 public:
  explicit TaskPool(std::size_t workers);
  ~TaskPool();

  void post(std::function<void()> job);
  std::size_t in_flight() const;

 private:
  void work(std::stop_token stop);

  mutable std::mutex mutex_;
  std::condition_variable_any cv_;
  std::deque<std::function<void()>> jobs_;
  std::size_t running_ = 0;
  std::vector<std::jthread> workers_;
};

// -- system ------------------------------------------------------------------------

struct SystemOptions {
  ClockSpec clock;
  std::uint64_t seed = 42;
  Timeouts timeouts;
  std::size_t task_workers = 2;
};

class System {
 public:
  explicit System(SystemOptions options = {});
  ~System();

  System(const System&) = delete;
  System& operator=(const System&) = delete;

  const Clock& clock() const noexcept { return *clock_; }
  ClockMode clock_mode() const noexcept { return clock_->mode(); }
  Timestamp now() const { return clock_->now(); }
  const SystemOptions& options() const noexcept { return options_; }

  void add_skill_factory(const std::string& name, SkillFactory factory);
  OntologyRegistry& ontologies() noexcept { return ontologies_; }
  ProcessLedger& processes() noexcept { return processes_; }

  /// Creates, sets up and starts an agent. Runs its one-shot behaviours and
  /// registers its services with the directory before returning.
  /// Throws Error{duplicate_address} or Error{discovery_unreachable}.
  Agent& spawn(const AgentConfig& cfg);
  /// Same, with explicitly constructed skills in addition to the named ones.
  Agent& spawn(const AgentConfig& cfg, std::vector<std::unique_ptr<Skill>> extra_skills);

  Agent* find(const std::string& name) const;
  std::vector<std::string> agent_names() const;
  bool is_live(const std::string& name) const;
  void stop_agent(const std::string& name);
  void stop();

  /// Enqueues for the named agent. Throws Error{agent_stopped} or Error{not_found}.
  void deliver(const std::string& name, const Envelope& e);

  /// Runs `fn` on the agent's event loop.
  void post(const std::string& name, std::function<void(Agent&)> fn);

  // Virtual clock driving. All throw Error{wrong_clock_mode} otherwise.
  void tick(const std::string& name, Timestamp now);
  /// Processes messages until every mailbox is empty (no clock movement).
  void run_pending();
  /// Processes messages and fires timers in time order up to `until`
  /// (inclusive), then leaves the clock at `until`.
  void run_until(Timestamp until);
  /// Like run_until with no horizon; stops when nothing is left to do or
  /// when `done` returns true.
  void run_until_idle(const std::function<bool()>& done = {});

  /// Waits (threaded) or drives (virtual) until `pred` holds. Returns false
  /// on timeout (wall time for threaded, clock time for virtual).
  bool await(const std::function<bool()>& pred, Duration timeout);

  /// No queued messages, no handler running, no task in flight.
  bool idle() const;

  std::size_t subscribe(EventListener listener);
  void unsubscribe(std::size_t id);
  void publish(SystemEvent ev);

 private:
  friend class Agent;

  bool route(const Envelope& e);
  void require_virtual(const char* op) const;
  void mark_ready(Agent* a);
  void run_ready();
  TaskPool& pool();

  SystemOptions options_;
  std::unique_ptr<Clock> clock_;
  VirtualClock* virtual_clock_ = nullptr;
  OntologyRegistry ontologies_;
  ProcessLedger processes_;
  std::map<std::string, SkillFactory> factories_;

  mutable std::mutex agents_mutex_;
  std::vector<std::unique_ptr<Agent>> agents_;
  std::map<std::string, Agent*> by_name_;

  std::mutex route_mutex_;
  mutable std::mutex ready_mutex_;
  std::deque<Agent*> ready_;  // virtual mode: agents in message-arrival order

  mutable std::mutex listeners_mutex_;
  std::map<std::size_t, EventListener> listeners_;
  std::size_t next_listener_ = 1;

  std::atomic<std::size_t> tasks_in_flight_{0};
  std::unique_ptr<TaskPool> pool_;
  std::mutex pool_mutex_;
};

}  // namespace a2sc
