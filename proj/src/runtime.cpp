#include "a2sc/runtime.hpp"

#include <algorithm>
#include <chrono>
#include <exception>

#include "a2sc/error.hpp"

namespace a2sc {

namespace {

constexpr const char* kRuntimeOwner = "";

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

// -- process ledger -----------------------------------------------------------------

Value to_value(const ProcessRecord& p) {
  return Value{{"id", p.id},         {"kind", p.kind},       {"initiator", p.initiator},
               {"status", p.status}, {"outcome", p.outcome}, {"detail", p.detail}};
}

std::string ProcessLedger::open(const std::string& kind, const std::string& initiator, Value detail) {
  ProcessRecord rec;
  std::function<void(const ProcessRecord&)> listener;
  {
    std::lock_guard lock(mutex_);
    rec.id = "P" + std::to_string(next_++);
    rec.kind = kind;
    rec.initiator = initiator;
    rec.detail = detail.is_object() ? std::move(detail) : Value::object();
    records_[rec.id] = rec;
    order_.push_back(rec.id);
    listener = listener_;
  }
  if (listener) listener(rec);
  return rec.id;
}

void ProcessLedger::close(const std::string& id, bool fulfilled, const std::string& outcome, const Value& detail) {
  ProcessRecord copy;
  std::function<void(const ProcessRecord&)> listener;
  {
    std::lock_guard lock(mutex_);
    const auto it = records_.find(id);
    if (it == records_.end() || it->second.terminal()) return;
    it->second.status = fulfilled ? "fulfilled" : "failed";
    it->second.outcome = outcome;
    if (detail.is_object()) {
      for (const auto& [k, v] : detail.items()) it->second.detail[k] = v;
    }
    copy = it->second;
    listener = listener_;
  }
  if (listener) listener(copy);
}

void ProcessLedger::annotate(const std::string& id, const std::string& key, const Value& value) {
  std::lock_guard lock(mutex_);
  if (const auto it = records_.find(id); it != records_.end()) it->second.detail[key] = value;
}

std::optional<ProcessRecord> ProcessLedger::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = records_.find(id);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

std::vector<ProcessRecord> ProcessLedger::all() const {
  std::lock_guard lock(mutex_);
  std::vector<ProcessRecord> out;
  out.reserve(order_.size());
  for (const auto& id : order_) out.push_back(records_.at(id));
  return out;
}

bool ProcessLedger::all_terminal() const {
  std::lock_guard lock(mutex_);
  return std::all_of(records_.begin(), records_.end(), [](const auto& kv) { return kv.second.terminal(); });
}

void ProcessLedger::set_listener(std::function<void(const ProcessRecord&)> fn) {
  std::lock_guard lock(mutex_);
  listener_ = std::move(fn);
}

// -- task pool ------------------------------------------------------------------------

TaskPool::TaskPool(std::size_t workers) {
  for (std::size_t i = 0; i < std::max<std::size_t>(workers, 1); ++i) {
    workers_.emplace_back([this](std::stop_token st) { work(st); });
  }
}

TaskPool::~TaskPool() {
  for (auto& w : workers_) w.request_stop();
  cv_.notify_all();
  workers_.clear();
}

void TaskPool::post(std::function<void()> job) {
  {
    std::lock_guard lock(mutex_);
    jobs_.push_back(std::move(job));
  }
  cv_.notify_one();
}

std::size_t TaskPool::in_flight() const {
  std::lock_guard lock(mutex_);
  return jobs_.size() + running_;
}

void TaskPool::work(std::stop_token stop) {
  while (true) {
    std::function<void()> job;
    {
      std::unique_lock lock(mutex_);
      cv_.wait(lock, stop, [this] { return !jobs_.empty(); });
      if (jobs_.empty()) return;  // stop requested
      job = std::move(jobs_.front());
      jobs_.pop_front();
      ++running_;
    }
    job();
    std::lock_guard lock(mutex_);
    --running_;
  }
}

// -- agent ---------------------------------------------------------------------------------

Agent::Agent(System& system, AgentConfig cfg, std::vector<std::unique_ptr<Skill>> skills, std::uint64_t seed)
    : system_(system),
      cfg_(std::move(cfg)),
      skills_(std::move(skills)),
      rng_(seed),
      conversations_(cfg_.address.name) {}

Agent::~Agent() { request_stop(); }

Timestamp Agent::now() const { return system_.now(); }

const Timeouts& Agent::timeouts() const noexcept { return system_.options().timeouts; }

bool Agent::send(const Envelope& e) { return system_.route(e); }

void Agent::notify(const std::string& kind, Value payload) {
  system_.publish(SystemEvent{kind, name(), std::move(payload), std::nullopt, now()});
}

Agent::TimerId Agent::schedule(Timestamp due, std::function<void(Agent&)> fn) {
  const auto seq = ++timer_seq_;
  timers_.emplace(std::make_pair(due, seq), Timer{due, seq, std::move(fn)});
  timer_index_.emplace(seq, std::make_pair(due, seq));
  timers_dirty_ = true;
  return seq;
}

void Agent::cancel(TimerId id) {
  const auto it = timer_index_.find(id);
  if (it == timer_index_.end()) return;
  timers_.erase(it->second);
  timer_index_.erase(it);
}

void Agent::add_behaviour(Behaviour b) {
  const Timestamp first = b.next_due != 0 ? b.next_due
                          : b.kind == Behaviour::Kind::periodic ? now() + b.interval.count()
                                                                : now();
  if (b.kind == Behaviour::Kind::periodic && b.interval.count() <= 0) {
    throw Error(Errc::config_error, "periodic behaviour '" + b.name + "' needs a positive interval");
  }
  auto shared = std::make_shared<Behaviour>(std::move(b));
  shared->next_due = first;
  // Periodic behaviours re-arm from their own due time, so a late tick
  // catches up one firing at a time and never overlaps itself.
  auto fire = std::make_shared<std::function<void(Agent&)>>();
  *fire = [shared, fire](Agent& self) {
    shared->action(self);
    if (shared->kind == Behaviour::Kind::periodic) {
      shared->next_due += shared->interval.count();
      self.schedule(shared->next_due, *fire);
    }
  };
  schedule(first, *fire);
}

TaskId Agent::submit_task(TaskWork work, TaskDone on_done, TaskProgress on_progress) {
  TaskId id;
  {
    std::lock_guard lock(mutex_);
    if (stopped_) throw Error(Errc::agent_stopped, name());
    id = next_task_++;
    tasks_[id] = TaskStatus{};
  }
  auto finish = [this, id, on_done](TaskStatus status) {
    {
      std::lock_guard lock(mutex_);
      tasks_[id] = status;
    }
    enqueue(Internal([on_done, status](Agent& a) {
      if (on_done) on_done(a, status);
    }));
  };
  auto run = [this, work, finish, on_progress]() {
    ProgressFn progress = [this, on_progress](Value v) {
      if (!on_progress) return;
      enqueue(Internal([on_progress, v = std::move(v)](Agent& a) { on_progress(a, v); }));
    };
    TaskStatus status;
    try {
      status.result = work(progress);
      status.state = TaskStatus::State::done;
    } catch (const std::exception& e) {
      status.state = TaskStatus::State::failed;
      status.error = e.what();
    }
    finish(std::move(status));
  };
  if (system_.clock_mode() == ClockMode::virtual_time) {
    // Deterministic: the work runs as the next event of this agent's loop.
    enqueue(Internal([run](Agent&) { run(); }));
  } else {
    system_.tasks_in_flight_.fetch_add(1);
    system_.pool().post([this, run] {
      run();
      system_.tasks_in_flight_.fetch_sub(1);
    });
  }
  return id;
}

std::optional<TaskStatus> Agent::poll_task(TaskId id) const {
  std::lock_guard lock(mutex_);
  const auto it = tasks_.find(id);
  if (it == tasks_.end()) return std::nullopt;
  return it->second;
}

std::string Agent::cn_start(const Skill& owner, const std::vector<AgentAddress>& participants, const Value& cfp,
                            std::optional<Duration> deadline, const std::string& ontology) {
  auto conversation = new_conversation();
  auto t = a2sc::cn_initiate(address(), participants, cfp, deadline.value_or(timeouts().cfp), now(), conversation,
                             ontology);
  dialogues_[conversation] = DialogueEntry{t.dialogue, owner.name()};
  apply(conversation, t.dialogue, t.actions);
  return conversation;
}

namespace {

template <typename F>
void drive_cn(DialogueTable& table, const std::string& conversation, F&& step,
              const std::function<void(const Dialogue&, const Actions&)>& apply) {
  const auto it = table.find(conversation);
  if (it == table.end()) throw Error(Errc::not_found, "no dialogue " + conversation);
  const auto* d = std::get_if<ContractNetDialogue>(&it->second.dialogue);
  if (d == nullptr) throw Error(Errc::invalid_state, conversation + " is not a contract-net dialogue");
  auto t = step(*d);
  apply(t.dialogue, t.actions);
}

}  // namespace

void Agent::cn_award(const std::string& conversation, const std::string& winner, const Value& accept,
                     const Value& reject) {
  drive_cn(dialogues_, conversation,
           [&](const ContractNetDialogue& d) { return a2sc::cn_award(d, winner, accept, reject, now()); },
           [&](const Dialogue& d, const Actions& a) { apply(conversation, d, a); });
}

void Agent::cn_decline(const std::string& conversation, const Value& reject) {
  drive_cn(dialogues_, conversation,
           [&](const ContractNetDialogue& d) { return a2sc::cn_decline(d, reject, now()); },
           [&](const Dialogue& d, const Actions& a) { apply(conversation, d, a); });
}

void Agent::cn_complete(const std::string& conversation, const Value& receipt) {
  drive_cn(dialogues_, conversation,
           [&](const ContractNetDialogue& d) { return a2sc::cn_complete(d, receipt, now()); },
           [&](const Dialogue& d, const Actions& a) { apply(conversation, d, a); });
}

void Agent::cn_propose(const std::string& conversation, const Value& content) {
  drive_cn(dialogues_, conversation,
           [&](const ContractNetDialogue& d) {
             return a2sc::cn_propose(d, content, now(), now() + timeouts().award.count());
           },
           [&](const Dialogue& d, const Actions& a) { apply(conversation, d, a); });
}

void Agent::cn_refuse(const std::string& conversation, const Value& content) {
  drive_cn(dialogues_, conversation,
           [&](const ContractNetDialogue& d) { return a2sc::cn_refuse(d, content, now()); },
           [&](const Dialogue& d, const Actions& a) { apply(conversation, d, a); });
}

void Agent::cn_inform(const std::string& conversation, const Value& content) {
  drive_cn(dialogues_, conversation,
           [&](const ContractNetDialogue& d) { return a2sc::cn_inform(d, content, now()); },
           [&](const Dialogue& d, const Actions& a) { apply(conversation, d, a); });
}

void Agent::cn_fail(const std::string& conversation, const Value& content) {
  drive_cn(dialogues_, conversation,
           [&](const ContractNetDialogue& d) { return a2sc::cn_fail(d, content, now()); },
           [&](const Dialogue& d, const Actions& a) { apply(conversation, d, a); });
}

std::string Agent::rr_request(const Skill& owner, const AgentAddress& target, Method method, const Value& content,
                              const std::string& ontology, std::optional<Duration> timeout,
                              const std::string& protocol) {
  auto conversation = new_conversation();
  auto t = a2sc::rr_request(address(), target, method, content, timeout.value_or(timeouts().request), now(),
                            conversation, ontology, protocol);
  dialogues_[conversation] = DialogueEntry{t.dialogue, owner.name()};
  apply(conversation, t.dialogue, t.actions);
  return conversation;
}

void Agent::rr_respond(const std::string& conversation, const Value& content) {
  const auto it = dialogues_.find(conversation);
  if (it == dialogues_.end()) throw Error(Errc::not_found, "no dialogue " + conversation);
  const auto* d = std::get_if<RequestResponseDialogue>(&it->second.dialogue);
  if (d == nullptr) throw Error(Errc::invalid_state, conversation + " is not a request-response dialogue");
  auto t = a2sc::rr_respond(*d, content, now());
  apply(conversation, t.dialogue, t.actions);
}

const ContractNetDialogue* Agent::contract_net(const std::string& conversation) const {
  const auto it = dialogues_.find(conversation);
  return it == dialogues_.end() ? nullptr : std::get_if<ContractNetDialogue>(&it->second.dialogue);
}

const RequestResponseDialogue* Agent::request_response(const std::string& conversation) const {
  const auto it = dialogues_.find(conversation);
  return it == dialogues_.end() ? nullptr : std::get_if<RequestResponseDialogue>(&it->second.dialogue);
}

std::size_t Agent::open_dialogues() const {
  return static_cast<std::size_t>(std::count_if(dialogues_.begin(), dialogues_.end(), [](const auto& kv) {
    return std::visit([](const auto& d) { return !d.terminal(); }, kv.second.dialogue);
  }));
}

std::optional<AgentAddress> Agent::discovery() const {
  if (!cfg_.discovery) return std::nullopt;
  return local_address(*cfg_.discovery);
}

Skill* Agent::skill(const std::string& skill_name) const {
  for (const auto& s : skills_) {
    if (s->name() == skill_name) return s.get();
  }
  return nullptr;
}

Value Agent::status() const {
  Value skills = Value::object();
  for (const auto& s : skills_) skills[s->name()] = s->status();
  Value regs = Value::object();
  for (const auto& [kind, id] : registrations_) regs[kind] = id;
  return Value{{"name", name()},
               {"type", cfg_.type},
               {"live", live()},
               {"open_dialogues", open_dialogues()},
               {"registrations", regs},
               {"skills", skills}};
}

bool Agent::live() const noexcept {
  std::lock_guard lock(mutex_);
  return !stopped_;
}

void Agent::enqueue(Event ev) {
  {
    std::lock_guard lock(mutex_);
    if (stopped_) return;
    mailbox_.push_back(std::move(ev));
  }
  if (system_.clock_mode() == ClockMode::virtual_time) {
    system_.mark_ready(this);
  } else {
    cv_.notify_one();
  }
}

bool Agent::mailbox_empty() const {
  std::lock_guard lock(mutex_);
  return mailbox_.empty() && !busy_;
}

bool Agent::process_one() {
  Event ev;
  {
    std::lock_guard lock(mutex_);
    if (mailbox_.empty() || stopped_) return false;
    ev = std::move(mailbox_.front());
    mailbox_.pop_front();
    busy_ = true;
  }
  try {
    if (auto* e = std::get_if<Envelope>(&ev)) {
      dispatch(*e);
    } else {
      std::get<Internal>(ev)(*this);
    }
  } catch (const std::exception& ex) {
    notify("violation", Value{{"agent", name()}, {"reason", ex.what()}});
  }
  {
    std::lock_guard lock(mutex_);
    busy_ = false;
  }
  return true;
}

void Agent::dispatch(const Envelope& e) {
  const auto route = dialogue_route(dialogues_, e);
  switch (route.kind) {
    case RouteKind::existing: {
      const auto owner = route.entry->owner;
      (void)owner;
      std::visit(
          [&](const auto& d) {
            using D = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<D, ContractNetDialogue>) {
              auto t = cn_step(d, e);
              apply(e.conversation, t.dialogue, t.actions);
            } else {
              auto t = rr_step(d, e);
              apply(e.conversation, t.dialogue, t.actions);
            }
          },
          route.entry->dialogue);
      return;
    }
    case RouteKind::new_dialogue: {
      std::string owner;
      bool found = false;
      for (const auto& s : skills_) {
        const auto protos = s->protocols();
        if (std::find(protos.begin(), protos.end(), e.protocol) == protos.end()) continue;
        if (!s->accepts(e)) continue;
        owner = s->name();
        found = true;
        break;
      }
      if (!found && e.performative.act == Act::request && e.content.is_object() &&
          e.content.value("type", std::string()) == "status-request") {
        owner = kRuntimeOwner;
        found = true;
      }
      if (!found) {
        notify("orphan", Value{{"agent", name()}, {"reason", "no skill for opening message"},
                               {"conversation", e.conversation}, {"performative", to_string(e.performative)}});
        return;
      }
      if (e.performative.act == Act::cfp) {
        auto t = cn_receive_cfp(address(), e);
        dialogues_[e.conversation] = DialogueEntry{t.dialogue, owner};
        apply(e.conversation, t.dialogue, t.actions);
      } else {
        auto t = rr_receive_request(address(), e);
        dialogues_[e.conversation] = DialogueEntry{t.dialogue, owner};
        apply(e.conversation, t.dialogue, t.actions);
      }
      return;
    }
    case RouteKind::orphan:
      notify("orphan", Value{{"agent", name()}, {"conversation", e.conversation},
                             {"performative", to_string(e.performative)}, {"sender", e.sender.name}});
      return;
  }
}

void Agent::apply(const std::string& conversation, const Dialogue& next, const Actions& actions) {
  std::string owner;
  {
    auto& entry = dialogues_.at(conversation);
    entry.dialogue = next;
    owner = entry.owner;
  }
  for (const auto& action : actions) {
    switch (action.kind) {
      case DialogueAction::Kind::send:
        if (!send(*action.envelope)) {
          const DialogueEvent ev{"undeliverable", Value{{"to", action.envelope->receiver.name}}};
          if (owner.empty()) {
            on_runtime_event(conversation, ev);
          } else if (auto* s = skill(owner)) {
            s->on_event(*this, conversation, ev);
          }
        }
        break;
      case DialogueAction::Kind::set_timer:
        schedule(action.deadline, [conversation](Agent& self) { self.feed_timer(conversation); });
        break;
      case DialogueAction::Kind::notify_owner:
        if (action.event.kind == "violation") notify("violation", action.event.detail);
        if (owner.empty()) {
          on_runtime_event(conversation, action.event);
        } else if (auto* s = skill(owner)) {
          s->on_event(*this, conversation, action.event);
        }
        break;
      case DialogueAction::Kind::close: break;
    }
  }
}

void Agent::feed_timer(const std::string& conversation) {
  const auto it = dialogues_.find(conversation);
  if (it == dialogues_.end()) return;
  const TimerExpiry expiry{now()};
  std::visit(
      [&](const auto& d) {
        using D = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<D, ContractNetDialogue>) {
          auto t = cn_step(d, expiry);
          if (!t.actions.empty() || !(t.dialogue == d)) apply(conversation, t.dialogue, t.actions);
        } else {
          auto t = rr_step(d, expiry);
          if (!t.actions.empty() || !(t.dialogue == d)) apply(conversation, t.dialogue, t.actions);
        }
      },
      it->second.dialogue);
}

void Agent::on_runtime_event(const std::string& conversation, const DialogueEvent& event) {
  if (event.kind == "request") {
    // Built-in status endpoint used by the admin portal.
    rr_respond(conversation, Value{{"type", "status"}, {"agent", status()}});
    return;
  }
  if (event.kind == "response") {
    std::lock_guard lock(mutex_);
    const auto it = pending_registrations_.find(conversation);
    if (it == pending_registrations_.end()) return;
    if (event.detail.value("type", std::string()) == "registered") {
      registrations_[it->second] = event.detail.value("id", std::string());
    }
    pending_registrations_.erase(it);
    return;
  }
  if (event.kind == "timeout" || event.kind == "undeliverable") {
    std::lock_guard lock(mutex_);
    pending_registrations_.erase(conversation);
    notify("notification", Value{{"agent", name()}, {"level", "warning"},
                                 {"message", "registration with the directory did not complete"}});
  }
}

std::size_t Agent::registered_count() const {
  std::lock_guard lock(mutex_);
  return registrations_.size();
}

std::optional<Timestamp> Agent::next_due() const {
  if (timers_.empty()) return std::nullopt;
  return timers_.begin()->first.first;
}

bool Agent::fire_one_due(Timestamp t) {
  if (timers_.empty() || timers_.begin()->first.first > t) return false;
  auto node = timers_.extract(timers_.begin());
  timer_index_.erase(node.mapped().seq);
  {
    std::lock_guard lock(mutex_);
    if (stopped_) return false;
    busy_ = true;
  }
  try {
    node.mapped().fn(*this);
  } catch (const std::exception& ex) {
    notify("violation", Value{{"agent", name()}, {"reason", ex.what()}});
  }
  std::lock_guard lock(mutex_);
  busy_ = false;
  return true;
}

void Agent::fire_due(Timestamp t) {
  while (fire_one_due(t)) {
  }
}

void Agent::register_services() {
  if (!cfg_.discovery) return;
  static const struct RuntimeOwner final : Skill {
    std::string name() const override { return kRuntimeOwner; }
    void on_event(Agent&, const std::string&, const DialogueEvent&) override {}
  } runtime_owner;
  for (const auto& service : cfg_.services) {
    ServiceDescription d;
    d.owner = address();
    d.kind = service.value("kind", std::string());
    d.attributes = service.value("attributes", Value::object());
    const auto conversation = new_conversation();
    {
      std::lock_guard lock(mutex_);
      pending_registrations_[conversation] = d.kind;
    }
    auto t = a2sc::rr_request(address(), *discovery(), Method::post,
                              Value{{"type", "register"}, {"description", to_value(d)}}, timeouts().request, now(),
                              conversation, "oef", std::string(kDiscovery));
    dialogues_[conversation] = DialogueEntry{t.dialogue, runtime_owner.name()};
    apply(conversation, t.dialogue, t.actions);
  }
}

void Agent::start() {
  if (system_.clock_mode() == ClockMode::virtual_time) return;
  thread_ = std::jthread([this](std::stop_token st) { run_loop(st); });
}

void Agent::run_loop(std::stop_token stop) {
  constexpr auto kMaxWait = std::chrono::milliseconds(20);
  while (!stop.stop_requested()) {
    {
      std::unique_lock lock(mutex_);
      if (mailbox_.empty()) {
        auto wait = std::chrono::duration_cast<std::chrono::nanoseconds>(kMaxWait);
        if (const auto due = next_due()) wait = std::min(wait, system_.clock().wall_until(*due));
        if (wait > std::chrono::nanoseconds::zero()) {
          cv_.wait_for(lock, wait, [&] { return !mailbox_.empty() || stop.stop_requested(); });
        }
      }
    }
    if (stop.stop_requested()) break;
    while (process_one()) {
      if (stop.stop_requested()) return;
    }
    fire_due(now());
  }
}

void Agent::request_stop() {
  {
    std::lock_guard lock(mutex_);
    if (thread_.joinable()) thread_.request_stop();
  }
  cv_.notify_all();
  if (thread_.joinable() && thread_.get_id() != std::this_thread::get_id()) thread_.join();
  std::lock_guard lock(mutex_);
  stopped_ = true;
  mailbox_.clear();
}

// -- system ----------------------------------------------------------------------------------

System::System(SystemOptions options) : options_(std::move(options)) {
  switch (options_.clock.mode) {
    case ClockMode::virtual_time: {
      auto vc = std::make_unique<VirtualClock>(options_.clock.origin);
      virtual_clock_ = vc.get();
      clock_ = std::move(vc);
      break;
    }
    case ClockMode::scaled:
      clock_ = std::make_unique<ScaledClock>(options_.clock.origin, options_.clock.factor, ClockMode::scaled);
      break;
    case ClockMode::real: {
      const auto wall = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::system_clock::now().time_since_epoch())
                            .count();
      clock_ = std::make_unique<ScaledClock>(wall, 1.0, ClockMode::real);
      break;
    }
  }
  processes_.set_listener([this](const ProcessRecord& rec) {
    publish(SystemEvent{"status", rec.initiator, to_value(rec), std::nullopt, now()});
  });
}

System::~System() { stop(); }

void System::add_skill_factory(const std::string& name, SkillFactory factory) {
  factories_[name] = std::move(factory);
}

Agent& System::spawn(const AgentConfig& cfg) { return spawn(cfg, {}); }

Agent& System::spawn(const AgentConfig& cfg, std::vector<std::unique_ptr<Skill>> extra_skills) {
  if (cfg.address.name.empty()) throw Error(Errc::config_error, "agent name is empty");
  if (cfg.clock.mode != options_.clock.mode) {
    throw Error(Errc::config_error, cfg.address.name + ": clock mode differs from the system clock");
  }
  if (find(cfg.address.name) != nullptr) throw Error(Errc::duplicate_address, cfg.address.name);
  if (cfg.discovery && !is_live(*cfg.discovery)) {
    throw Error(Errc::discovery_unreachable, cfg.address.name + " cannot reach " + *cfg.discovery);
  }
  std::vector<std::unique_ptr<Skill>> skills;
  for (const auto& skill_name : cfg.skills) {
    const auto it = factories_.find(skill_name);
    if (it == factories_.end()) throw Error(Errc::config_error, "unknown skill '" + skill_name + "'");
    skills.push_back(it->second(cfg.params));
  }
  for (auto& s : extra_skills) skills.push_back(std::move(s));
  const std::uint64_t seed = cfg.seed != 0 ? cfg.seed : options_.seed ^ fnv1a(cfg.address.name);

  auto owned = std::make_unique<Agent>(*this, cfg, std::move(skills), seed);
  Agent& agent = *owned;
  {
    std::lock_guard lock(agents_mutex_);
    if (by_name_.count(cfg.address.name) != 0) throw Error(Errc::duplicate_address, cfg.address.name);
    by_name_[cfg.address.name] = owned.get();
    agents_.push_back(std::move(owned));
  }
  for (const auto& s : agent.skills_) s->setup(agent);
  agent.register_services();
  agent.fire_due(now());
  agent.start();

  if (clock_mode() == ClockMode::virtual_time) {
    run_pending();
  } else if (!cfg.services.empty() && cfg.discovery) {
    const auto expected = cfg.services.size();
    const auto wall = std::chrono::duration<double, std::milli>(options_.timeouts.request.count() /
                                                                std::max(options_.clock.factor, 1.0));
    const auto deadline = std::chrono::steady_clock::now() +
                          std::max(std::chrono::duration_cast<std::chrono::milliseconds>(wall),
                                   std::chrono::milliseconds(500));
    while (agent.registered_count() < expected && std::chrono::steady_clock::now() < deadline) {
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
  }
  return agent;
}

Agent* System::find(const std::string& name) const {
  std::lock_guard lock(agents_mutex_);
  const auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

std::vector<std::string> System::agent_names() const {
  std::lock_guard lock(agents_mutex_);
  std::vector<std::string> out;
  for (const auto& a : agents_) out.push_back(a->name());
  return out;
}

bool System::is_live(const std::string& name) const {
  const Agent* a = find(name);
  return a != nullptr && a->live();
}

void System::stop_agent(const std::string& name) {
  Agent* a = find(name);
  if (a == nullptr) throw Error(Errc::not_found, name);
  a->request_stop();
}

void System::stop() {
  std::vector<Agent*> all;
  {
    std::lock_guard lock(agents_mutex_);
    for (auto& a : agents_) all.push_back(a.get());
  }
  for (auto* a : all) a->request_stop();
  std::unique_ptr<TaskPool> pool;
  {
    std::lock_guard lock(pool_mutex_);
    pool = std::move(pool_);
  }
  pool.reset();
}

void System::deliver(const std::string& name, const Envelope& e) {
  Agent* a = find(name);
  if (a == nullptr) throw Error(Errc::not_found, name);
  if (!a->live()) throw Error(Errc::agent_stopped, name);
  a->enqueue(e);
}

void System::post(const std::string& name, std::function<void(Agent&)> fn) {
  Agent* a = find(name);
  if (a == nullptr) throw Error(Errc::not_found, name);
  if (!a->live()) throw Error(Errc::agent_stopped, name);
  a->enqueue(Agent::Internal(std::move(fn)));
}

void System::require_virtual(const char* op) const {
  if (clock_mode() != ClockMode::virtual_time) {
    throw Error(Errc::wrong_clock_mode, std::string(op) + " needs the virtual clock");
  }
}

void System::mark_ready(Agent* a) {
  std::lock_guard lock(ready_mutex_);
  ready_.push_back(a);
}

void System::run_ready() {
  while (true) {
    Agent* a = nullptr;
    {
      std::lock_guard lock(ready_mutex_);
      if (ready_.empty()) return;
      a = ready_.front();
      ready_.pop_front();
    }
    a->process_one();
  }
}

void System::tick(const std::string& name, Timestamp t) {
  require_virtual("tick");
  Agent* a = find(name);
  if (a == nullptr) throw Error(Errc::not_found, name);
  run_ready();
  while (const auto due = a->next_due()) {
    if (*due > t) break;
    virtual_clock_->advance_to(*due);
    a->fire_one_due(*due);
    run_ready();
  }
  virtual_clock_->advance_to(t);
  run_ready();
}

void System::run_pending() {
  require_virtual("run_pending");
  run_ready();
}

namespace {

struct NextTimer {
  Agent* agent = nullptr;
  Timestamp due = 0;
};

}  // namespace

void System::run_until(Timestamp until) {
  require_virtual("run_until");
  while (true) {
    run_ready();
    NextTimer next;
    {
      std::lock_guard lock(agents_mutex_);
      for (const auto& a : agents_) {
        if (!a->live()) continue;
        const auto due = a->next_due();
        if (due && *due <= until && (next.agent == nullptr || *due < next.due)) next = {a.get(), *due};
      }
    }
    if (next.agent == nullptr) break;
    virtual_clock_->advance_to(next.due);
    next.agent->fire_one_due(next.due);
  }
  virtual_clock_->advance_to(until);
  run_ready();
}

void System::run_until_idle(const std::function<bool()>& done) {
  require_virtual("run_until_idle");
  while (true) {
    run_ready();
    if (done && done()) return;
    NextTimer next;
    {
      std::lock_guard lock(agents_mutex_);
      for (const auto& a : agents_) {
        if (!a->live()) continue;
        const auto due = a->next_due();
        if (due && (next.agent == nullptr || *due < next.due)) next = {a.get(), *due};
      }
    }
    if (next.agent == nullptr) return;
    virtual_clock_->advance_to(next.due);
    next.agent->fire_one_due(next.due);
  }
}

bool System::await(const std::function<bool()>& pred, Duration timeout) {
  if (clock_mode() == ClockMode::virtual_time) {
    const Timestamp horizon = now() + timeout.count();
    while (true) {
      run_ready();
      if (pred()) return true;
      NextTimer next;
      {
        std::lock_guard lock(agents_mutex_);
        for (const auto& a : agents_) {
          if (!a->live()) continue;
          const auto due = a->next_due();
          if (due && *due <= horizon && (next.agent == nullptr || *due < next.due)) next = {a.get(), *due};
        }
      }
      if (next.agent == nullptr) return pred();
      virtual_clock_->advance_to(next.due);
      next.agent->fire_one_due(next.due);
    }
  }
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (!pred()) {
    if (std::chrono::steady_clock::now() >= deadline) return false;
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  return true;
}

bool System::idle() const {
  {
    std::lock_guard lock(ready_mutex_);
    if (!ready_.empty()) return false;
  }
  if (tasks_in_flight_.load() != 0) return false;
  std::lock_guard lock(agents_mutex_);
  return std::all_of(agents_.begin(), agents_.end(), [](const auto& a) { return a->mailbox_empty(); });
}

std::size_t System::subscribe(EventListener listener) {
  std::lock_guard lock(listeners_mutex_);
  const auto id = next_listener_++;
  listeners_[id] = std::move(listener);
  return id;
}

void System::unsubscribe(std::size_t id) {
  std::lock_guard lock(listeners_mutex_);
  listeners_.erase(id);
}

void System::publish(SystemEvent ev) {
  std::lock_guard lock(listeners_mutex_);
  for (const auto& [_, fn] : listeners_) fn(ev);
}

bool System::route(const Envelope& e) {
  validate(e);
  if (!ontologies_.empty()) ontologies_.validate(e);
  std::lock_guard lock(route_mutex_);
  Agent* target = find(e.receiver.name);
  if (target == nullptr || !target->live()) {
    publish(SystemEvent{"undeliverable", e.sender.name, Value{{"to", e.receiver.name}}, e, e.timestamp});
    return false;
  }
  publish(SystemEvent{"envelope", e.sender.name, Value::object(), e, e.timestamp});
  target->enqueue(e);
  return true;
}

TaskPool& System::pool() {
  std::lock_guard lock(pool_mutex_);
  if (!pool_) pool_ = std::make_unique<TaskPool>(options_.task_workers);
  return *pool_;
}

}  // namespace a2sc
