#pragma once

// Interaction protocols as pure state machines. Every transition returns the
// next dialogue value plus the actions the owner must carry out; nothing here
// touches clocks, sockets or mailboxes.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "a2sc/messaging.hpp"

namespace a2sc {

struct DialogueEvent {
  std::string kind;  // cfp, select, refused, timeout, result, failure, accepted,
                     // rejected, receipt, request, response, violation
  Value detail = Value::object();

  bool operator==(const DialogueEvent&) const = default;
};

struct DialogueAction {
  enum class Kind { send, notify_owner, set_timer, close };

  Kind kind = Kind::close;
  std::optional<Envelope> envelope;  // send
  DialogueEvent event;               // notify_owner
  Timestamp deadline = 0;            // set_timer

  static DialogueAction send(Envelope e);
  static DialogueAction notify(std::string kind, Value detail = Value::object());
  static DialogueAction timer(Timestamp deadline);
  static DialogueAction close();

  bool operator==(const DialogueAction&) const = default;
};

using Actions = std::vector<DialogueAction>;

struct TimerExpiry {
  Timestamp now = 0;
  bool operator==(const TimerExpiry&) const = default;
};

using DialogueInput = std::variant<Envelope, TimerExpiry>;

template <typename Dialogue>
struct Transition {
  Dialogue dialogue;
  Actions actions;
};

// -- contract net -------------------------------------------------------------

enum class CnRole { initiator, participant };

enum class CnState {
  created,
  cfp_sent,
  cfp_received,
  collecting,
  proposed,
  award_pending,
  awarded,
  inform_sent,
  inform_received,
  refused,
  failed,
  timed_out,
  done,
};

std::string_view to_string(CnState s) noexcept;
bool is_terminal(CnState s) noexcept;

struct ContractNetDialogue {
  CnRole role = CnRole::initiator;
  CnState state = CnState::created;
  std::string conversation;
  std::string ontology;
  AgentAddress self;
  /// Invitees for the initiator; the single initiator for a participant.
  std::vector<AgentAddress> participants;
  std::map<std::string, Value> proposals;  // proposer name -> propose content
  std::set<std::string> answered;
  Timestamp deadline = 0;
  std::optional<std::string> winner;
  int accepts_sent = 0;
  Value cfp = Value::object();

  bool terminal() const noexcept { return is_terminal(state); }
  bool operator==(const ContractNetDialogue&) const = default;
};

/// Initiator: one cfp per participant plus a collection timer at now+deadline.
Transition<ContractNetDialogue> cn_initiate(const AgentAddress& self,
                                            const std::vector<AgentAddress>& participants,
                                            const Value& cfp_content, Duration deadline,
                                            Timestamp now, std::string conversation,
                                            std::string ontology = "meat-trade");

/// Feeds one envelope or timer expiry. Illegal inputs leave the dialogue
/// unchanged and yield a single notify-owner(violation) action.
Transition<ContractNetDialogue> cn_step(const ContractNetDialogue& d, const DialogueInput& input);

/// Initiator in award-pending: accept-proposal to `winner`, reject-proposal to
/// every other proposer.
Transition<ContractNetDialogue> cn_award(const ContractNetDialogue& d, const std::string& winner,
                                         const Value& accept_content, const Value& reject_content,
                                         Timestamp now);

/// Initiator in award-pending with nothing acceptable: rejects every proposer.
Transition<ContractNetDialogue> cn_decline(const ContractNetDialogue& d, const Value& reject_content,
                                           Timestamp now);

/// Initiator after the winner's inform: sends the receipt and closes.
Transition<ContractNetDialogue> cn_complete(const ContractNetDialogue& d, const Value& receipt,
                                            Timestamp now);

Transition<ContractNetDialogue> cn_receive_cfp(const AgentAddress& self, const Envelope& cfp);
Transition<ContractNetDialogue> cn_propose(const ContractNetDialogue& d, const Value& content,
                                           Timestamp now, Timestamp award_deadline);
Transition<ContractNetDialogue> cn_refuse(const ContractNetDialogue& d, const Value& content,
                                          Timestamp now);
Transition<ContractNetDialogue> cn_inform(const ContractNetDialogue& d, const Value& content,
                                          Timestamp now);
Transition<ContractNetDialogue> cn_fail(const ContractNetDialogue& d, const Value& content,
                                        Timestamp now);

// -- request / response ---------------------------------------------------------

enum class RrRole { client, server };
enum class RrState { created, request_sent, responded, timed_out };

std::string_view to_string(RrState s) noexcept;

struct RequestResponseDialogue {
  RrRole role = RrRole::client;
  RrState state = RrState::created;
  Method method = Method::get;
  std::string conversation;
  std::string protocol{kRequestResponse};
  std::string ontology;
  AgentAddress self;
  AgentAddress peer;
  Timestamp deadline = 0;
  Value request = Value::object();
  std::optional<std::string> reply_with;

  bool terminal() const noexcept { return state == RrState::responded || state == RrState::timed_out; }
  bool operator==(const RequestResponseDialogue&) const = default;
};

Transition<RequestResponseDialogue> rr_request(const AgentAddress& self, const AgentAddress& target,
                                               Method method, const Value& content, Duration timeout,
                                               Timestamp now, std::string conversation,
                                               std::string ontology,
                                               std::string protocol = std::string(kRequestResponse));

Transition<RequestResponseDialogue> rr_step(const RequestResponseDialogue& d, const DialogueInput& input);

Transition<RequestResponseDialogue> rr_receive_request(const AgentAddress& self, const Envelope& request);
Transition<RequestResponseDialogue> rr_respond(const RequestResponseDialogue& d, const Value& content,
                                               Timestamp now);

// -- routing ----------------------------------------------------------------------

using Dialogue = std::variant<ContractNetDialogue, RequestResponseDialogue>;

struct DialogueEntry {
  Dialogue dialogue;
  std::string owner;  // name of the owning skill
};

using DialogueTable = std::map<std::string, DialogueEntry>;

enum class RouteKind { existing, new_dialogue, orphan };

struct Route {
  RouteKind kind = RouteKind::orphan;
  const DialogueEntry* entry = nullptr;
};

Route dialogue_route(const DialogueTable& table, const Envelope& e);

}  // namespace a2sc
