#include "a2sc/messaging.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <utility>

#include "a2sc/error.hpp"

namespace a2sc {

namespace {

struct ActName {
  Act act;
  std::string_view name;
};

constexpr std::array<ActName, 9> kActNames{{
    {Act::cfp, "cfp"},
    {Act::propose, "propose"},
    {Act::accept_proposal, "accept-proposal"},
    {Act::reject_proposal, "reject-proposal"},
    {Act::refuse, "refuse"},
    {Act::inform, "inform"},
    {Act::failure, "failure"},
    {Act::request, "request"},
    {Act::response, "response"},
}};

bool is_known_protocol(std::string_view protocol) {
  return protocol == kContractNet || protocol == kRequestResponse || protocol == kDiscovery;
}

bool all_finite(const Value& v) {
  switch (v.type()) {
    case Value::value_t::number_float: return std::isfinite(v.get<double>());
    case Value::value_t::array:
    case Value::value_t::object:
      for (const auto& child : v) {
        if (!all_finite(child)) return false;
      }
      return true;
    case Value::value_t::discarded: return false;
    default: return true;
  }
}

Value address_value(const AgentAddress& a) {
  return Value{{"endpoint", a.endpoint}, {"name", a.name}};
}

[[noreturn]] void malformed(const std::string& why) { throw Error(Errc::malformed_encoding, why); }

AgentAddress address_from(const Value& v, std::string_view field) {
  if (!v.is_object() || v.size() != 2 || !v.contains("name") || !v.contains("endpoint")) {
    malformed(std::string(field) + " must be {endpoint,name}");
  }
  const auto& name = v.at("name");
  const auto& endpoint = v.at("endpoint");
  if (!name.is_string() || !endpoint.is_string()) malformed(std::string(field) + " fields must be strings");
  AgentAddress out{name.get<std::string>(), endpoint.get<std::string>()};
  if (out.name.empty()) malformed(std::string(field) + ".name is empty");
  return out;
}

std::string string_field(const Value& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) malformed(std::string("missing string field ") + key);
  return it->get<std::string>();
}

}  // namespace

AgentAddress local_address(std::string name) {
  std::string endpoint = "local://" + name;
  return AgentAddress{std::move(name), std::move(endpoint)};
}

std::string to_string(Performative p) {
  for (const auto& [act, name] : kActNames) {
    if (act != p.act) continue;
    std::string out(name);
    if (p.act == Act::request && p.method) {
      out += *p.method == Method::get ? "/get" : "/post";
    }
    return out;
  }
  return "unknown";
}

std::optional<Performative> parse_performative(std::string_view text) {
  if (text == "request/get") return Performative::get();
  if (text == "request/post") return Performative::post();
  for (const auto& [act, name] : kActNames) {
    if (name == text && act != Act::request) return Performative{act, std::nullopt};
  }
  return std::nullopt;
}

bool valid_for_protocol(std::string_view protocol, Performative p) noexcept {
  const bool is_request = p.act == Act::request;
  if (is_request != p.method.has_value()) return false;
  if (protocol == kContractNet) {
    switch (p.act) {
      case Act::cfp:
      case Act::propose:
      case Act::accept_proposal:
      case Act::reject_proposal:
      case Act::refuse:
      case Act::inform:
      case Act::failure: return true;
      default: return false;
    }
  }
  if (protocol == kRequestResponse || protocol == kDiscovery) {
    return p.act == Act::request || p.act == Act::response;
  }
  return false;
}

void validate(const Envelope& e) {
  if (!is_known_protocol(e.protocol)) {
    throw Error(Errc::invalid_performative, "unknown protocol '" + e.protocol + "'");
  }
  if (!valid_for_protocol(e.protocol, e.performative)) {
    throw Error(Errc::invalid_performative, to_string(e.performative) + " is not part of " + e.protocol);
  }
  if (e.conversation.empty()) throw Error(Errc::empty_conversation, "conversation id is empty");
  if (e.sender.name.empty() || e.receiver.name.empty()) {
    throw Error(Errc::validation_error, "sender and receiver need names");
  }
  if (!all_finite(e.content)) throw Error(Errc::validation_error, "content holds a non-finite number");
}

Envelope make_envelope(AgentAddress sender, AgentAddress receiver, std::string protocol,
                       std::string ontology, std::string conversation, Performative performative,
                       Value content, Timestamp timestamp) {
  Envelope e;
  e.sender = std::move(sender);
  e.receiver = std::move(receiver);
  e.protocol = std::move(protocol);
  e.ontology = std::move(ontology);
  e.conversation = std::move(conversation);
  e.performative = performative;
  e.content = std::move(content);
  e.timestamp = timestamp;
  validate(e);
  return e;
}

Value to_value(const Envelope& e) {
  Value v = Value::object();
  v["content"] = e.content;
  v["conversation"] = e.conversation;
  if (e.in_reply_to) v["in_reply_to"] = *e.in_reply_to;
  v["ontology"] = e.ontology;
  v["performative"] = to_string(e.performative);
  v["protocol"] = e.protocol;
  v["receiver"] = address_value(e.receiver);
  if (e.reply_with) v["reply_with"] = *e.reply_with;
  v["sender"] = address_value(e.sender);
  v["timestamp"] = e.timestamp;
  return v;
}

Envelope envelope_from_value(const Value& v) {
  if (!v.is_object()) malformed("envelope must be an object");
  static constexpr std::array<std::string_view, 10> kAllowed{
      "content", "conversation", "in_reply_to", "ontology", "performative",
      "protocol", "receiver", "reply_with", "sender", "timestamp"};
  for (const auto& [key, _] : v.items()) {
    if (std::find(kAllowed.begin(), kAllowed.end(), key) == kAllowed.end()) {
      malformed("unexpected field '" + key + "'");
    }
  }
  Envelope e;
  e.sender = address_from(v.contains("sender") ? v.at("sender") : Value(), "sender");
  e.receiver = address_from(v.contains("receiver") ? v.at("receiver") : Value(), "receiver");
  e.protocol = string_field(v, "protocol");
  e.ontology = string_field(v, "ontology");
  e.conversation = string_field(v, "conversation");
  if (v.contains("reply_with")) e.reply_with = string_field(v, "reply_with");
  if (v.contains("in_reply_to")) e.in_reply_to = string_field(v, "in_reply_to");
  const auto performative = parse_performative(string_field(v, "performative"));
  if (!performative) malformed("unknown performative");
  e.performative = *performative;
  if (!v.contains("content")) malformed("missing content");
  e.content = v.at("content");
  const auto& ts = v.contains("timestamp") ? v.at("timestamp") : Value();
  if (ts.is_number_unsigned()) {
    if (ts.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) malformed("timestamp overflow");
    e.timestamp = static_cast<Timestamp>(ts.get<std::uint64_t>());
  } else if (ts.is_number_integer()) {
    e.timestamp = ts.get<Timestamp>();
  } else {
    malformed("timestamp must be an integer");
  }
  try {
    validate(e);
  } catch (const Error& err) {
    malformed(err.what());
  }
  return e;
}

std::string encode(const Envelope& e) {
  const std::string body = to_value(e).dump();
  std::string out = std::to_string(body.size());
  out.reserve(out.size() + body.size() + 2);
  out += ':';
  out += body;
  out += ',';
  return out;
}

Envelope decode(std::string_view bytes) {
  if (bytes.empty()) malformed("empty input");
  const auto colon = bytes.find(':');
  if (colon == std::string_view::npos || colon == 0 || colon > 10) malformed("missing length prefix");
  if (bytes[0] == '0') malformed("length has a leading zero");
  std::size_t length = 0;
  const auto [ptr, ec] = std::from_chars(bytes.data(), bytes.data() + colon, length);
  if (ec != std::errc() || ptr != bytes.data() + colon) malformed("bad length prefix");
  if (bytes.size() != colon + 1 + length + 1) malformed("length does not match payload");
  if (bytes.back() != ',') malformed("missing terminator");
  const auto body = bytes.substr(colon + 1, length);
  Value v = Value::parse(body, nullptr, /*allow_exceptions=*/false);
  if (v.is_discarded()) malformed("payload is not valid JSON");
  return envelope_from_value(v);
}

Envelope decode(std::span<const std::uint8_t> bytes) {
  return decode(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::string ConversationIds::next() { return initiator_ + "/" + std::to_string(++counter_); }

}  // namespace a2sc
