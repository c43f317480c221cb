#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace a2sc {

enum class Errc {
  invalid_performative,
  empty_conversation,
  malformed_encoding,
  ontology_violation,
  no_participants,
  protocol_violation,
  unknown_winner,
  invalid_state,
  invalid_description,
  unknown_id,
  malformed_query,
  duplicate_address,
  discovery_unreachable,
  agent_stopped,
  wrong_clock_mode,
  product_mismatch,
  no_acceptable_proposal,
  insufficient_stock,
  malformed_row,
  non_monotonic_timestamps,
  empty_trace,
  already_started,
  validation_error,
  system_not_ready,
  not_found,
  not_ready,
  config_error,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

  Errc code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace a2sc
