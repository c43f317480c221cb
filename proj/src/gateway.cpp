#include "a2sc/gateway.hpp"

#include <algorithm>

#include "a2sc/agents.hpp"
#include "a2sc/error.hpp"
#include "a2sc/scenario.hpp"

namespace a2sc {

Value to_value(const PushFrame& f) { return Value{{"seq", f.seq}, {"kind", f.kind}, {"payload", f.payload}}; }

std::optional<PushFrame> frame_for(const SystemEvent& ev) {
  PushFrame f;
  if (ev.kind == "envelope" && ev.envelope) {
    const auto& e = *ev.envelope;
    f.kind = "chat";
    f.payload = Value{{"sender", e.sender.name},       {"recipient", e.receiver.name},
                      {"performative", to_string(e.performative)},
                      {"body", e.content},             {"conversation", e.conversation},
                      {"protocol", e.protocol},        {"ontology", e.ontology},
                      {"timestamp", e.timestamp}};
    return f;
  }
  if (ev.kind == "location" || ev.kind == "sensor" || ev.kind == "report" || ev.kind == "notification" ||
      ev.kind == "status") {
    f.kind = ev.kind;
    f.payload = ev.payload;
  } else if (ev.kind == "inventory") {
    f.kind = "status";
    f.payload = ev.payload;
    f.payload["kind"] = "inventory";
  } else if (ev.kind == "alert") {
    f.kind = "notification";
    f.payload = ev.payload;
    f.payload["level"] = "warning";
    f.payload["kind"] = "alert";
  } else if (ev.kind == "violation" || ev.kind == "orphan" || ev.kind == "undeliverable") {
    f.kind = "notification";
    f.payload = ev.payload;
    f.payload["level"] = ev.kind == "violation" ? "error" : "warning";
    f.payload["kind"] = ev.kind;
  } else {
    return std::nullopt;
  }
  if (!f.payload.contains("time")) f.payload["time"] = ev.time;
  return f;
}

std::set<std::string> parse_kinds(std::string_view list) {
  std::set<std::string> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const auto comma = list.find(',', start);
    const auto item = list.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    if (!item.empty()) {
      if (kFrameKinds.count(std::string(item)) == 0) {
        throw Error(Errc::validation_error, "unknown frame kind '" + std::string(item) + "'");
      }
      out.emplace(item);
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

// -- subscription ------------------------------------------------------------------------

Subscription::Subscription(std::set<std::string> kinds, std::size_t capacity)
    : kinds_(std::move(kinds)), capacity_(std::max<std::size_t>(capacity, 1)) {}

bool Subscription::wants(const std::string& kind) const { return kinds_.empty() || kinds_.count(kind) != 0; }

void Subscription::push(PushFrame frame) {
  {
    std::lock_guard lock(mutex_);
    if (closed_) return;
    frame.seq = next_seq_++;
    if (queue_.size() >= capacity_) {
      ++dropped_;
      return;
    }
    queue_.push_back(std::move(frame));
  }
  cv_.notify_one();
}

std::optional<PushFrame> Subscription::pop(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  cv_.wait_for(lock, timeout, [this] { return !queue_.empty() || closed_; });
  if (queue_.empty()) return std::nullopt;
  auto f = std::move(queue_.front());
  queue_.pop_front();
  return f;
}

std::vector<PushFrame> Subscription::drain() {
  std::lock_guard lock(mutex_);
  std::vector<PushFrame> out(std::make_move_iterator(queue_.begin()), std::make_move_iterator(queue_.end()));
  queue_.clear();
  return out;
}

std::size_t Subscription::dropped() const {
  std::lock_guard lock(mutex_);
  return dropped_;
}

void Subscription::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool Subscription::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

// -- gateway -------------------------------------------------------------------------------

Gateway::Gateway(System& system, std::size_t queue_capacity) : system_(system), capacity_(queue_capacity) {
  subscription_ = system_.subscribe([this](const SystemEvent& ev) { on_event(ev); });
}

Gateway::~Gateway() {
  system_.unsubscribe(subscription_);
  std::lock_guard lock(mutex_);
  for (auto& s : subscribers_) s->close();
}

std::shared_ptr<Subscription> Gateway::subscribe(std::set<std::string> kinds) {
  auto s = std::make_shared<Subscription>(std::move(kinds), capacity_);
  std::lock_guard lock(mutex_);
  subscribers_.push_back(s);
  return s;
}

void Gateway::unsubscribe(const std::shared_ptr<Subscription>& s) {
  std::lock_guard lock(mutex_);
  s->close();
  dropped_total_ += s->dropped();
  subscribers_.erase(std::remove(subscribers_.begin(), subscribers_.end(), s), subscribers_.end());
}

void Gateway::on_event(const SystemEvent& ev) {
  const auto frame = frame_for(ev);
  if (!frame) return;
  std::lock_guard lock(mutex_);
  for (const auto& s : subscribers_) {
    if (s->wants(frame->kind)) s->push(*frame);
  }
}

std::string Gateway::place_order(const Value& body) {
  return a2sc::place_order(system_, order_request_from_value(body));
}

Value Gateway::agents() {
  Agent* admin = nullptr;
  for (const auto& name : system_.agent_names()) {
    Agent* a = system_.find(name);
    if (a != nullptr && a->live() && a->skill_as<AdminSkill>() != nullptr) {
      admin = a;
      break;
    }
  }
  if (admin == nullptr) {
    // No admin portal agent: report liveness only.
    Value list = Value::array();
    for (const auto& name : system_.agent_names()) {
      const Agent* a = system_.find(name);
      if (a == nullptr || a->config().type == "directory") continue;
      list.push_back(Value{{"name", name}, {"type", a->config().type}, {"live", a->live()}, {"reachable", false}});
    }
    return list;
  }
  auto* skill = admin->skill_as<AdminSkill>();
  const auto before = skill->generation();
  system_.post(admin->name(), [skill](Agent& a) { skill->refresh(a); });
  const auto refreshed = [&] { return skill->generation() > before; };
  if (system_.clock_mode() == ClockMode::virtual_time) {
    system_.run_pending();
    if (!refreshed()) system_.await(refreshed, system_.options().timeouts.request);
  } else {
    system_.await(refreshed, std::chrono::seconds(2));
  }
  return skill->overview();
}

Value Gateway::get_state(std::string_view path) {
  const auto slash = path.find('/');
  const std::string head(path.substr(0, slash));
  const std::string tail = slash == std::string_view::npos ? std::string() : std::string(path.substr(slash + 1));
  if (head == "agents" && tail.empty()) return agents();
  if (head == "processes") {
    if (tail.empty()) {
      Value list = Value::array();
      for (const auto& p : system_.processes().all()) list.push_back(to_value(p));
      return list;
    }
    if (const auto p = system_.processes().get(tail)) return to_value(*p);
    throw Error(Errc::not_found, "no process " + tail);
  }
  if (head == "inventory" && !tail.empty()) {
    const Agent* a = system_.find(tail);
    const auto* t = a != nullptr ? a->skill_as<TraderSkill>() : nullptr;
    if (t == nullptr) throw Error(Errc::not_found, "no inventory for " + tail);
    Value v = to_value(t->inventory());
    v["agent"] = tail;
    v["in_transit_out"] = t->in_transit_out();
    return v;
  }
  if ((head == "deliveries" || head == "reports") && !tail.empty()) {
    for (const auto& name : system_.agent_names()) {
      const Agent* a = system_.find(name);
      const auto* c = a != nullptr ? a->skill_as<CarrierSkill>() : nullptr;
      if (c == nullptr) continue;
      if (head == "deliveries") {
        if (auto d = c->delivery(tail)) return *d;
      } else if (auto r = c->report(tail)) {
        if (r->is_null()) throw Error(Errc::not_ready, "delivery " + tail + " has not completed");
        return Value{{"tracking_number", tail}, {"report", *r}};
      }
    }
    throw Error(Errc::not_found, "unknown tracking number " + tail);
  }
  throw Error(Errc::not_found, "no such resource '" + std::string(path) + "'");
}

namespace {

int http_status(Errc code) {
  switch (code) {
    case Errc::validation_error: return 400;
    case Errc::not_found: return 404;
    case Errc::not_ready: return 409;
    case Errc::system_not_ready: return 503;
    default: return 500;
  }
}

}  // namespace

HttpReply Gateway::handle(std::string_view method, std::string_view target, std::string_view body) {
  const auto query = target.find('?');
  std::string_view path = target.substr(0, query);
  while (!path.empty() && path.front() == '/') path.remove_prefix(1);
  try {
    if (path == "orders") {
      if (method != "POST") return {405, Value{{"error", "method-not-allowed"}, {"message", "use POST"}}};
      const Value v = Value::parse(body, nullptr, false);
      if (v.is_discarded()) throw Error(Errc::validation_error, "body is not JSON");
      return {202, Value{{"process_id", place_order(v)}}};
    }
    if (method != "GET") return {405, Value{{"error", "method-not-allowed"}, {"message", "use GET"}}};
    return {200, get_state(path)};
  } catch (const Error& e) {
    return {http_status(e.code()), Value{{"error", to_string(e.code())}, {"message", e.detail()}}};
  } catch (const std::exception& e) {
    return {500, Value{{"error", "internal"}, {"message", e.what()}}};
  }
}

Value Gateway::stats() const {
  std::lock_guard lock(mutex_);
  std::size_t dropped = dropped_total_;
  for (const auto& s : subscribers_) dropped += s->dropped();
  return Value{{"subscribers", subscribers_.size()}, {"dropped", dropped}};
}

}  // namespace a2sc
