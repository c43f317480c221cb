#pragma once

// Shared vocabularies. An ontology file looks like
//
//   {
//     "name": "meat-trade",
//     "terms": {
//       "purchase-order": {
//         "order_id": {"kind": "string"},
//         "quantity": {"kind": "number"},
//         "delivery_option": {"kind": "string", "required": false}
//       }
//     }
//   }
//
// A content object conforms when its "type" names a term, every other key is
// a declared field of that term with a matching kind, and every required
// field is present.

#include <filesystem>
#include <map>
#include <string>

#include "a2sc/messaging.hpp"

namespace a2sc {

enum class FieldKind { string, number, integer, boolean, object, array, any };

struct FieldSpec {
  FieldKind kind = FieldKind::any;
  bool required = true;
};

struct Term {
  std::string name;
  std::map<std::string, FieldSpec> fields;
};

struct Ontology {
  std::string name;
  std::map<std::string, Term> terms;

  /// Throws Error{ontology_violation} when `content` does not conform.
  void validate(const Value& content) const;

  static Ontology from_value(const Value& v);
  static Ontology load(const std::filesystem::path& file);
};

class OntologyRegistry {
 public:
  void add(Ontology ontology);
  bool contains(const std::string& name) const { return ontologies_.count(name) != 0; }
  const Ontology& at(const std::string& name) const;

  /// Validates the envelope's content against its ontology.
  void validate(const Envelope& e) const;

  bool empty() const { return ontologies_.empty(); }

 private:
  std::map<std::string, Ontology> ontologies_;
};

}  // namespace a2sc
