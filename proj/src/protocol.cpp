#include "a2sc/protocol.hpp"

#include <algorithm>
#include <utility>

#include "a2sc/error.hpp"

namespace a2sc {

DialogueAction DialogueAction::send(Envelope e) {
  DialogueAction a;
  a.kind = Kind::send;
  a.envelope = std::move(e);
  return a;
}

DialogueAction DialogueAction::notify(std::string kind, Value detail) {
  DialogueAction a;
  a.kind = Kind::notify_owner;
  a.event = DialogueEvent{std::move(kind), std::move(detail)};
  return a;
}

DialogueAction DialogueAction::timer(Timestamp deadline) {
  DialogueAction a;
  a.kind = Kind::set_timer;
  a.deadline = deadline;
  return a;
}

DialogueAction DialogueAction::close() { return DialogueAction{}; }

std::string_view to_string(CnState s) noexcept {
  switch (s) {
    case CnState::created: return "created";
    case CnState::cfp_sent: return "cfp-sent";
    case CnState::cfp_received: return "cfp-received";
    case CnState::collecting: return "collecting";
    case CnState::proposed: return "proposed";
    case CnState::award_pending: return "award-pending";
    case CnState::awarded: return "awarded";
    case CnState::inform_sent: return "inform-sent";
    case CnState::inform_received: return "inform-received";
    case CnState::refused: return "refused";
    case CnState::failed: return "failed";
    case CnState::timed_out: return "timed-out";
    case CnState::done: return "done";
  }
  return "unknown";
}

bool is_terminal(CnState s) noexcept {
  return s == CnState::done || s == CnState::failed || s == CnState::timed_out || s == CnState::refused;
}

std::string_view to_string(RrState s) noexcept {
  switch (s) {
    case RrState::created: return "created";
    case RrState::request_sent: return "request-sent";
    case RrState::responded: return "responded";
    case RrState::timed_out: return "timed-out";
  }
  return "unknown";
}

namespace {

using CnT = Transition<ContractNetDialogue>;
using RrT = Transition<RequestResponseDialogue>;

Envelope cn_envelope(const ContractNetDialogue& d, const AgentAddress& to, Performative p,
                     const Value& content, Timestamp now) {
  Envelope e;
  e.sender = d.self;
  e.receiver = to;
  e.protocol = std::string(kContractNet);
  e.ontology = d.ontology;
  e.conversation = d.conversation;
  e.performative = p;
  e.content = content;
  e.timestamp = now;
  return e;
}

template <typename D>
Transition<D> violation(const D& d, const std::string& reason, const Envelope* e) {
  Value detail{{"reason", reason}, {"conversation", d.conversation}};
  if (e != nullptr) {
    detail["performative"] = to_string(e->performative);
    detail["sender"] = e->sender.name;
  }
  return {d, {DialogueAction::notify("violation", std::move(detail))}};
}

[[noreturn]] void bad_state(std::string_view op, CnState s) {
  throw Error(Errc::invalid_state, std::string(op) + " not allowed in state " + std::string(to_string(s)));
}

bool is_invitee(const ContractNetDialogue& d, const std::string& name) {
  return std::any_of(d.participants.begin(), d.participants.end(),
                     [&](const AgentAddress& a) { return a.name == name; });
}

const AgentAddress& address_of(const ContractNetDialogue& d, const std::string& name) {
  for (const auto& a : d.participants) {
    if (a.name == name) return a;
  }
  throw Error(Errc::unknown_winner, name);
}

Value proposals_value(const ContractNetDialogue& d) {
  Value v = Value::object();
  for (const auto& [who, content] : d.proposals) v[who] = content;
  return v;
}

// Closes proposal collection: award-pending with at least one proposal,
// otherwise `empty_state` (refused when everyone answered, timed-out on the
// deadline).
CnT close_collection(ContractNetDialogue d, CnState empty_state) {
  Actions actions;
  if (!d.proposals.empty()) {
    d.state = CnState::award_pending;
    actions.push_back(DialogueAction::notify("select", proposals_value(d)));
  } else {
    d.state = empty_state;
    actions.push_back(DialogueAction::notify(empty_state == CnState::timed_out ? "timeout" : "refused",
                                             Value{{"conversation", d.conversation}}));
    actions.push_back(DialogueAction::close());
  }
  return {std::move(d), std::move(actions)};
}

CnT initiator_step(const ContractNetDialogue& d, const Envelope& e) {
  switch (d.state) {
    case CnState::cfp_sent:
    case CnState::collecting: {
      const bool is_propose = e.performative.act == Act::propose;
      const bool is_refuse = e.performative.act == Act::refuse;
      if (!is_propose && !is_refuse) return violation(d, "unexpected performative while collecting", &e);
      if (!is_invitee(d, e.sender.name)) return violation(d, "answer from a non-participant", &e);
      if (d.answered.count(e.sender.name) != 0) return violation(d, "duplicate answer", &e);
      ContractNetDialogue next = d;
      next.answered.insert(e.sender.name);
      Actions actions;
      if (is_propose) {
        next.proposals[e.sender.name] = e.content;
        actions.push_back(DialogueAction::notify("proposal", Value{{"from", e.sender.name}}));
      } else {
        actions.push_back(DialogueAction::notify("refusal", Value{{"from", e.sender.name}, {"content", e.content}}));
      }
      if (next.answered.size() == next.participants.size()) {
        auto closed = close_collection(std::move(next), CnState::refused);
        actions.insert(actions.end(), closed.actions.begin(), closed.actions.end());
        return {std::move(closed.dialogue), std::move(actions)};
      }
      next.state = CnState::collecting;
      return {std::move(next), std::move(actions)};
    }
    case CnState::awarded: {
      if (!d.winner || e.sender.name != *d.winner) return violation(d, "result from a non-winner", &e);
      ContractNetDialogue next = d;
      if (e.performative.act == Act::inform) {
        next.state = CnState::inform_received;
        return {std::move(next), {DialogueAction::notify("result", e.content)}};
      }
      if (e.performative.act == Act::failure) {
        next.state = CnState::failed;
        return {std::move(next), {DialogueAction::notify("failure", e.content), DialogueAction::close()}};
      }
      return violation(d, "unexpected performative after award", &e);
    }
    default: return violation(d, "no input expected in this state", &e);
  }
}

CnT participant_step(const ContractNetDialogue& d, const Envelope& e) {
  if (d.participants.empty() || e.sender.name != d.participants.front().name) {
    return violation(d, "message from someone other than the initiator", &e);
  }
  ContractNetDialogue next = d;
  switch (d.state) {
    case CnState::proposed:
      if (e.performative.act == Act::accept_proposal) {
        next.state = CnState::awarded;
        return {std::move(next), {DialogueAction::notify("accepted", e.content)}};
      }
      if (e.performative.act == Act::reject_proposal) {
        next.state = CnState::done;
        return {std::move(next), {DialogueAction::notify("rejected", e.content), DialogueAction::close()}};
      }
      return violation(d, "expected accept-proposal or reject-proposal", &e);
    case CnState::inform_sent:
      if (e.performative.act == Act::inform) {
        next.state = CnState::done;
        return {std::move(next), {DialogueAction::notify("receipt", e.content), DialogueAction::close()}};
      }
      return violation(d, "expected a receipt", &e);
    default: return violation(d, "no input expected in this state", &e);
  }
}

CnT timer_step(const ContractNetDialogue& d, const TimerExpiry& t) {
  if (t.now < d.deadline) return {d, {}};
  if (d.role == CnRole::initiator && (d.state == CnState::cfp_sent || d.state == CnState::collecting)) {
    return close_collection(d, CnState::timed_out);
  }
  if (d.role == CnRole::participant && d.state == CnState::proposed) {
    ContractNetDialogue next = d;
    next.state = CnState::timed_out;
    return {std::move(next),
            {DialogueAction::notify("timeout", Value{{"conversation", d.conversation}}), DialogueAction::close()}};
  }
  return {d, {}};
}

}  // namespace

CnT cn_initiate(const AgentAddress& self, const std::vector<AgentAddress>& participants,
                const Value& cfp_content, Duration deadline, Timestamp now, std::string conversation,
                std::string ontology) {
  if (participants.empty()) throw Error(Errc::no_participants, "contract net needs at least one participant");
  if (deadline.count() <= 0) throw Error(Errc::validation_error, "cfp deadline must be positive");
  if (conversation.empty()) throw Error(Errc::empty_conversation, "conversation id is empty");
  ContractNetDialogue d;
  d.role = CnRole::initiator;
  d.state = CnState::cfp_sent;
  d.conversation = std::move(conversation);
  d.ontology = std::move(ontology);
  d.self = self;
  d.participants = participants;
  d.deadline = now + deadline.count();
  d.cfp = cfp_content;
  Actions actions;
  for (const auto& p : participants) {
    actions.push_back(DialogueAction::send(cn_envelope(d, p, Performative::cfp(), cfp_content, now)));
  }
  actions.push_back(DialogueAction::timer(d.deadline));
  return {std::move(d), std::move(actions)};
}

CnT cn_step(const ContractNetDialogue& d, const DialogueInput& input) {
  if (const auto* t = std::get_if<TimerExpiry>(&input)) {
    if (d.terminal()) return {d, {}};
    return timer_step(d, *t);
  }
  const auto& e = std::get<Envelope>(input);
  if (e.conversation != d.conversation) return violation(d, "conversation mismatch", &e);
  if (e.protocol != kContractNet) return violation(d, "protocol mismatch", &e);
  if (d.terminal()) return violation(d, "dialogue already finished", &e);
  return d.role == CnRole::initiator ? initiator_step(d, e) : participant_step(d, e);
}

CnT cn_award(const ContractNetDialogue& d, const std::string& winner, const Value& accept_content,
             const Value& reject_content, Timestamp now) {
  if (d.role != CnRole::initiator || d.state != CnState::award_pending) bad_state("award", d.state);
  if (d.proposals.count(winner) == 0) throw Error(Errc::unknown_winner, "no proposal from " + winner);
  ContractNetDialogue next = d;
  next.state = CnState::awarded;
  next.winner = winner;
  next.accepts_sent += 1;
  Actions actions;
  actions.push_back(DialogueAction::send(
      cn_envelope(d, address_of(d, winner), Performative::accept_proposal(), accept_content, now)));
  for (const auto& [who, _] : d.proposals) {
    if (who == winner) continue;
    actions.push_back(DialogueAction::send(
        cn_envelope(d, address_of(d, who), Performative::reject_proposal(), reject_content, now)));
  }
  return {std::move(next), std::move(actions)};
}

CnT cn_decline(const ContractNetDialogue& d, const Value& reject_content, Timestamp now) {
  if (d.role != CnRole::initiator || d.state != CnState::award_pending) bad_state("decline", d.state);
  ContractNetDialogue next = d;
  next.state = CnState::refused;
  Actions actions;
  for (const auto& [who, _] : d.proposals) {
    actions.push_back(DialogueAction::send(
        cn_envelope(d, address_of(d, who), Performative::reject_proposal(), reject_content, now)));
  }
  actions.push_back(DialogueAction::close());
  return {std::move(next), std::move(actions)};
}

CnT cn_complete(const ContractNetDialogue& d, const Value& receipt, Timestamp now) {
  if (d.role != CnRole::initiator || d.state != CnState::inform_received) bad_state("complete", d.state);
  ContractNetDialogue next = d;
  next.state = CnState::done;
  return {std::move(next),
          {DialogueAction::send(cn_envelope(d, address_of(d, *d.winner), Performative::inform(), receipt, now)),
           DialogueAction::close()}};
}

CnT cn_receive_cfp(const AgentAddress& self, const Envelope& cfp) {
  if (cfp.performative.act != Act::cfp || cfp.protocol != kContractNet) {
    throw Error(Errc::protocol_violation, "a participant dialogue starts with a cfp");
  }
  ContractNetDialogue d;
  d.role = CnRole::participant;
  d.state = CnState::cfp_received;
  d.conversation = cfp.conversation;
  d.ontology = cfp.ontology;
  d.self = self;
  d.participants = {cfp.sender};
  d.cfp = cfp.content;
  return {d, {DialogueAction::notify("cfp", cfp.content)}};
}

CnT cn_propose(const ContractNetDialogue& d, const Value& content, Timestamp now, Timestamp award_deadline) {
  if (d.role != CnRole::participant || d.state != CnState::cfp_received) bad_state("propose", d.state);
  ContractNetDialogue next = d;
  next.state = CnState::proposed;
  next.deadline = award_deadline;
  return {std::move(next),
          {DialogueAction::send(cn_envelope(d, d.participants.front(), Performative::propose(), content, now)),
           DialogueAction::timer(award_deadline)}};
}

CnT cn_refuse(const ContractNetDialogue& d, const Value& content, Timestamp now) {
  if (d.role != CnRole::participant || d.state != CnState::cfp_received) bad_state("refuse", d.state);
  ContractNetDialogue next = d;
  next.state = CnState::refused;
  return {std::move(next),
          {DialogueAction::send(cn_envelope(d, d.participants.front(), Performative::refuse(), content, now)),
           DialogueAction::close()}};
}

CnT cn_inform(const ContractNetDialogue& d, const Value& content, Timestamp now) {
  if (d.role != CnRole::participant || d.state != CnState::awarded) bad_state("inform", d.state);
  ContractNetDialogue next = d;
  next.state = CnState::inform_sent;
  return {std::move(next),
          {DialogueAction::send(cn_envelope(d, d.participants.front(), Performative::inform(), content, now))}};
}

CnT cn_fail(const ContractNetDialogue& d, const Value& content, Timestamp now) {
  if (d.role != CnRole::participant || d.state != CnState::awarded) bad_state("failure", d.state);
  ContractNetDialogue next = d;
  next.state = CnState::failed;
  return {std::move(next),
          {DialogueAction::send(cn_envelope(d, d.participants.front(), Performative::failure(), content, now)),
           DialogueAction::close()}};
}

// -- request / response -------------------------------------------------------

RrT rr_request(const AgentAddress& self, const AgentAddress& target, Method method, const Value& content,
               Duration timeout, Timestamp now, std::string conversation, std::string ontology,
               std::string protocol) {
  if (timeout.count() <= 0) throw Error(Errc::validation_error, "request timeout must be positive");
  if (conversation.empty()) throw Error(Errc::empty_conversation, "conversation id is empty");
  RequestResponseDialogue d;
  d.role = RrRole::client;
  d.state = RrState::request_sent;
  d.method = method;
  d.conversation = std::move(conversation);
  d.protocol = std::move(protocol);
  d.ontology = std::move(ontology);
  d.self = self;
  d.peer = target;
  d.deadline = now + timeout.count();
  d.request = content;
  d.reply_with = d.conversation + "#req";
  Envelope e;
  e.sender = self;
  e.receiver = target;
  e.protocol = d.protocol;
  e.ontology = d.ontology;
  e.conversation = d.conversation;
  e.reply_with = d.reply_with;
  e.performative = method == Method::get ? Performative::get() : Performative::post();
  e.content = content;
  e.timestamp = now;
  return {std::move(d), {DialogueAction::send(std::move(e)), DialogueAction::timer(now + timeout.count())}};
}

RrT rr_step(const RequestResponseDialogue& d, const DialogueInput& input) {
  if (const auto* t = std::get_if<TimerExpiry>(&input)) {
    if (d.role != RrRole::client || d.state != RrState::request_sent || t->now < d.deadline) return {d, {}};
    RequestResponseDialogue next = d;
    next.state = RrState::timed_out;
    return {std::move(next),
            {DialogueAction::notify("timeout", Value{{"conversation", d.conversation}}), DialogueAction::close()}};
  }
  const auto& e = std::get<Envelope>(input);
  if (e.conversation != d.conversation) return violation(d, "conversation mismatch", &e);
  if (d.terminal()) return violation(d, "dialogue already finished", &e);
  if (d.role != RrRole::client || d.state != RrState::request_sent) {
    return violation(d, "no input expected in this state", &e);
  }
  if (e.performative.act != Act::response) return violation(d, "expected a response", &e);
  if (e.sender.name != d.peer.name) return violation(d, "response from someone other than the server", &e);
  RequestResponseDialogue next = d;
  next.state = RrState::responded;
  return {std::move(next), {DialogueAction::notify("response", e.content), DialogueAction::close()}};
}

RrT rr_receive_request(const AgentAddress& self, const Envelope& request) {
  if (request.performative.act != Act::request) {
    throw Error(Errc::protocol_violation, "a server dialogue starts with a request");
  }
  RequestResponseDialogue d;
  d.role = RrRole::server;
  d.state = RrState::created;
  d.method = request.performative.method.value_or(Method::get);
  d.conversation = request.conversation;
  d.protocol = request.protocol;
  d.ontology = request.ontology;
  d.self = self;
  d.peer = request.sender;
  d.request = request.content;
  d.reply_with = request.reply_with;
  return {d, {DialogueAction::notify("request", request.content)}};
}

RrT rr_respond(const RequestResponseDialogue& d, const Value& content, Timestamp now) {
  if (d.role != RrRole::server || d.state != RrState::created) {
    throw Error(Errc::invalid_state, "respond not allowed in state " + std::string(to_string(d.state)));
  }
  RequestResponseDialogue next = d;
  next.state = RrState::responded;
  Envelope e;
  e.sender = d.self;
  e.receiver = d.peer;
  e.protocol = d.protocol;
  e.ontology = d.ontology;
  e.conversation = d.conversation;
  e.in_reply_to = d.reply_with;
  e.performative = Performative::response();
  e.content = content;
  e.timestamp = now;
  return {std::move(next), {DialogueAction::send(std::move(e)), DialogueAction::close()}};
}

Route dialogue_route(const DialogueTable& table, const Envelope& e) {
  if (const auto it = table.find(e.conversation); it != table.end()) {
    return {RouteKind::existing, &it->second};
  }
  if (e.performative.act == Act::cfp || e.performative.act == Act::request) {
    return {RouteKind::new_dialogue, nullptr};
  }
  return {RouteKind::orphan, nullptr};
}

}  // namespace a2sc
