#pragma once

// The directory agent's skill: a Registry served over the "discovery"
// protocol, plus the content builders clients use to talk to it.
//
// Requests (ontology "oef"):
//   post {type: register, description}     -> {type: registered, id}
//   post {type: unregister, id}            -> {type: unregistered, id}
//   get  {type: search, query}             -> {type: search-result, results: [...]}
// Failures answer {type: error, code, message}.

#include <filesystem>
#include <optional>

#include "a2sc/discovery.hpp"
#include "a2sc/runtime.hpp"

namespace a2sc {

class DirectorySkill final : public Skill {
 public:
  explicit DirectorySkill(std::optional<std::filesystem::path> snapshot = std::nullopt);

  std::string name() const override { return "directory"; }
  std::vector<std::string> protocols() const override { return {std::string(kDiscovery)}; }
  void setup(Agent& agent) override;
  void on_event(Agent& agent, const std::string& conversation, const DialogueEvent& event) override;
  Value status() const override;

  Registry& registry() noexcept { return registry_; }

  /// Answers one request content; exposed for tests.
  Value handle(const Value& request);

 private:
  Registry registry_;
  std::optional<std::filesystem::path> snapshot_;
};

Value search_request(const Query& q);
Value register_request(const ServiceDescription& d);
Value unregister_request(const std::string& id);

/// Parses a search-result response. Throws Error{malformed_query} with the
/// server message when the response is an error.
std::vector<ServiceDescription> search_results(const Value& response);

}  // namespace a2sc
