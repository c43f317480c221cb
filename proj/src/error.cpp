#include "a2sc/error.hpp"

namespace a2sc {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_performative: return "invalid-performative";
    case Errc::empty_conversation: return "empty-conversation";
    case Errc::malformed_encoding: return "malformed-encoding";
    case Errc::ontology_violation: return "ontology-violation";
    case Errc::no_participants: return "no-participants";
    case Errc::protocol_violation: return "protocol-violation";
    case Errc::unknown_winner: return "unknown-winner";
    case Errc::invalid_state: return "invalid-state";
    case Errc::invalid_description: return "invalid-description";
    case Errc::unknown_id: return "unknown-id";
    case Errc::malformed_query: return "malformed-query";
    case Errc::duplicate_address: return "duplicate-address";
    case Errc::discovery_unreachable: return "discovery-unreachable";
    case Errc::agent_stopped: return "agent-stopped";
    case Errc::wrong_clock_mode: return "wrong-clock-mode";
    case Errc::product_mismatch: return "product-mismatch";
    case Errc::no_acceptable_proposal: return "no-acceptable-proposal";
    case Errc::insufficient_stock: return "insufficient-stock";
    case Errc::malformed_row: return "malformed-row";
    case Errc::non_monotonic_timestamps: return "non-monotonic-timestamps";
    case Errc::empty_trace: return "empty-trace";
    case Errc::already_started: return "already-started";
    case Errc::validation_error: return "validation-error";
    case Errc::system_not_ready: return "system-not-ready";
    case Errc::not_found: return "not-found";
    case Errc::not_ready: return "not-ready";
    case Errc::config_error: return "config-error";
  }
  return "unknown";
}

}  // namespace a2sc
