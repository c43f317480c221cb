#pragma once

// Agent communication language: addresses, performatives, envelopes and the
// netstring-framed JSON wire encoding.
//
// Wire format (byte exact):
//
//   <length>:<json>,
//
// where <length> is the decimal byte count of <json> without leading zeros,
// and <json> is the compact UTF-8 serialisation of a single object whose keys
// appear in lexicographic order:
//
//   content, conversation, [in_reply_to], ontology, performative, protocol,
//   receiver, [reply_with], sender, timestamp
//
// Addresses serialise as {"endpoint": ..., "name": ...}. Performatives
// serialise as their FIPA name ("cfp", "accept-proposal", ...), with requests
// qualified by method: "request/get" or "request/post".

#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace a2sc {

/// Tree value carried as message content (maps, lists, strings, numbers,
/// booleans). Object keys are kept sorted, which makes serialisation
/// deterministic.
using Value = nlohmann::json;

/// Milliseconds since the Unix epoch, as read from the runtime clock.
using Timestamp = std::int64_t;
using Duration = std::chrono::milliseconds;

inline constexpr std::string_view kContractNet = "contract-net";
inline constexpr std::string_view kRequestResponse = "request-response";
inline constexpr std::string_view kDiscovery = "discovery";

struct AgentAddress {
  std::string name;
  std::string endpoint;

  auto operator<=>(const AgentAddress&) const = default;
};

/// Address routed by the in-process router: endpoint "local://<name>".
AgentAddress local_address(std::string name);

enum class Act {
  cfp,
  propose,
  accept_proposal,
  reject_proposal,
  refuse,
  inform,
  failure,
  request,
  response,
};

enum class Method { get, post };

struct Performative {
  Act act = Act::inform;
  std::optional<Method> method;  // set iff act == Act::request

  static Performative cfp() { return {Act::cfp, std::nullopt}; }
  static Performative propose() { return {Act::propose, std::nullopt}; }
  static Performative accept_proposal() { return {Act::accept_proposal, std::nullopt}; }
  static Performative reject_proposal() { return {Act::reject_proposal, std::nullopt}; }
  static Performative refuse() { return {Act::refuse, std::nullopt}; }
  static Performative inform() { return {Act::inform, std::nullopt}; }
  static Performative failure() { return {Act::failure, std::nullopt}; }
  static Performative get() { return {Act::request, Method::get}; }
  static Performative post() { return {Act::request, Method::post}; }
  static Performative response() { return {Act::response, std::nullopt}; }

  bool operator==(const Performative&) const = default;
};

std::string to_string(Performative p);
std::optional<Performative> parse_performative(std::string_view text);

/// True iff `p` belongs to the closed performative set of `protocol`.
/// "discovery" shares the request-response set.
bool valid_for_protocol(std::string_view protocol, Performative p) noexcept;

struct Envelope {
  AgentAddress sender;
  AgentAddress receiver;
  std::string protocol;
  std::string ontology;
  std::string conversation;
  std::optional<std::string> reply_with;
  std::optional<std::string> in_reply_to;
  Performative performative;
  Value content = Value::object();
  Timestamp timestamp = 0;

  bool operator==(const Envelope&) const = default;
};

/// Builds a validated envelope. Throws Error{invalid_performative} when the
/// performative is outside the protocol's set and Error{empty_conversation}
/// for an empty conversation id.
Envelope make_envelope(AgentAddress sender, AgentAddress receiver, std::string protocol,
                       std::string ontology, std::string conversation, Performative performative,
                       Value content, Timestamp timestamp = 0);

/// Checks every envelope invariant; throws the matching Error on failure.
void validate(const Envelope& e);

Value to_value(const Envelope& e);
Envelope envelope_from_value(const Value& v);

std::string encode(const Envelope& e);

/// Throws Error{malformed_encoding} for anything that is not exactly one
/// well-formed encoded envelope.
Envelope decode(std::span<const std::uint8_t> bytes);
Envelope decode(std::string_view bytes);

/// Issues "<initiator>/<n>" conversation ids with a monotonic counter.
class ConversationIds {
 public:
  explicit ConversationIds(std::string initiator) : initiator_(std::move(initiator)) {}

  std::string next();

 private:
  std::string initiator_;
  std::uint64_t counter_ = 0;
};

}  // namespace a2sc
