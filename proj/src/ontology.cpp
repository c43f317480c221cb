#include "a2sc/ontology.hpp"

#include <fstream>

#include "a2sc/error.hpp"

namespace a2sc {

namespace {

FieldKind parse_kind(const std::string& text) {
  if (text == "string") return FieldKind::string;
  if (text == "number") return FieldKind::number;
  if (text == "integer") return FieldKind::integer;
  if (text == "boolean") return FieldKind::boolean;
  if (text == "object") return FieldKind::object;
  if (text == "array") return FieldKind::array;
  if (text == "any") return FieldKind::any;
  throw Error(Errc::config_error, "unknown field kind '" + text + "'");
}

bool matches(FieldKind kind, const Value& v) {
  switch (kind) {
    case FieldKind::string: return v.is_string();
    case FieldKind::number: return v.is_number();
    case FieldKind::integer: return v.is_number_integer();
    case FieldKind::boolean: return v.is_boolean();
    case FieldKind::object: return v.is_object();
    case FieldKind::array: return v.is_array();
    case FieldKind::any: return true;
  }
  return false;
}

}  // namespace

void Ontology::validate(const Value& content) const {
  if (!content.is_object()) throw Error(Errc::ontology_violation, name + ": content must be an object");
  const auto type = content.find("type");
  if (type == content.end() || !type->is_string()) {
    throw Error(Errc::ontology_violation, name + ": content has no term type");
  }
  const auto term = terms.find(type->get<std::string>());
  if (term == terms.end()) {
    throw Error(Errc::ontology_violation, name + ": undefined term '" + type->get<std::string>() + "'");
  }
  for (const auto& [key, value] : content.items()) {
    if (key == "type") continue;
    const auto field = term->second.fields.find(key);
    if (field == term->second.fields.end()) {
      throw Error(Errc::ontology_violation, term->first + ": undeclared field '" + key + "'");
    }
    if (!matches(field->second.kind, value)) {
      throw Error(Errc::ontology_violation, term->first + ": field '" + key + "' has the wrong kind");
    }
  }
  for (const auto& [key, spec] : term->second.fields) {
    if (spec.required && !content.contains(key)) {
      throw Error(Errc::ontology_violation, term->first + ": missing field '" + key + "'");
    }
  }
}

Ontology Ontology::from_value(const Value& v) {
  try {
    Ontology out;
    out.name = v.at("name").get<std::string>();
    for (const auto& [term_name, fields] : v.at("terms").items()) {
      Term term{term_name, {}};
      for (const auto& [field_name, spec] : fields.items()) {
        FieldSpec fs;
        fs.kind = parse_kind(spec.value("kind", std::string("any")));
        fs.required = spec.value("required", true);
        term.fields.emplace(field_name, fs);
      }
      out.terms.emplace(term_name, std::move(term));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::config_error, std::string("ontology schema: ") + e.what());
  }
}

Ontology Ontology::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(Errc::config_error, "cannot open ontology file " + file.string());
  const Value v = Value::parse(in, nullptr, false);
  if (v.is_discarded()) throw Error(Errc::config_error, "ontology file is not JSON: " + file.string());
  return from_value(v);
}

void OntologyRegistry::add(Ontology ontology) {
  auto name = ontology.name;
  ontologies_.insert_or_assign(std::move(name), std::move(ontology));
}

const Ontology& OntologyRegistry::at(const std::string& name) const {
  const auto it = ontologies_.find(name);
  if (it == ontologies_.end()) throw Error(Errc::ontology_violation, "unknown ontology '" + name + "'");
  return it->second;
}

void OntologyRegistry::validate(const Envelope& e) const { at(e.ontology).validate(e.content); }

}  // namespace a2sc
