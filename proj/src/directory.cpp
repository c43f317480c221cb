#include "a2sc/directory.hpp"

#include "a2sc/error.hpp"

namespace a2sc {

DirectorySkill::DirectorySkill(std::optional<std::filesystem::path> snapshot) : snapshot_(std::move(snapshot)) {}

void DirectorySkill::setup(Agent&) {
  if (snapshot_ && std::filesystem::exists(*snapshot_)) registry_.load(*snapshot_);
}

Value DirectorySkill::handle(const Value& request) {
  try {
    const auto type = request.is_object() ? request.value("type", std::string()) : std::string();
    if (type == "register") {
      const auto id = registry_.register_service(description_from_value(request.at("description")));
      if (snapshot_) registry_.save(*snapshot_);
      return Value{{"type", "registered"}, {"id", id}};
    }
    if (type == "unregister") {
      const auto id = request.at("id").get<std::string>();
      registry_.unregister(id);
      if (snapshot_) registry_.save(*snapshot_);
      return Value{{"type", "unregistered"}, {"id", id}};
    }
    if (type == "search") {
      Value results = Value::array();
      for (const auto& d : registry_.search(query_from_value(request.at("query")))) results.push_back(to_value(d));
      return Value{{"type", "search-result"}, {"results", results}};
    }
    return Value{{"type", "error"}, {"code", "validation-error"}, {"message", "unknown request '" + type + "'"}};
  } catch (const Error& e) {
    return Value{{"type", "error"}, {"code", to_string(e.code())}, {"message", e.detail()}};
  } catch (const nlohmann::json::exception& e) {
    return Value{{"type", "error"}, {"code", "validation-error"}, {"message", e.what()}};
  }
}

void DirectorySkill::on_event(Agent& agent, const std::string& conversation, const DialogueEvent& event) {
  if (event.kind == "request") agent.rr_respond(conversation, handle(event.detail));
}

Value DirectorySkill::status() const { return Value{{"entries", registry_.size()}}; }

Value search_request(const Query& q) { return Value{{"type", "search"}, {"query", to_value(q)}}; }

Value register_request(const ServiceDescription& d) {
  return Value{{"type", "register"}, {"description", to_value(d)}};
}

Value unregister_request(const std::string& id) { return Value{{"type", "unregister"}, {"id", id}}; }

std::vector<ServiceDescription> search_results(const Value& response) {
  if (!response.is_object() || response.value("type", std::string()) != "search-result") {
    const auto message = response.is_object() ? response.value("message", std::string("bad response"))
                                              : std::string("bad response");
    throw Error(Errc::malformed_query, message);
  }
  std::vector<ServiceDescription> out;
  for (const auto& v : response.at("results")) out.push_back(description_from_value(v));
  return out;
}

}  // namespace a2sc
