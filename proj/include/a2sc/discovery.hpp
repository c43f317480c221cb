#pragma once

// Service registry and attribute matchmaking: the directory agents register
// with and query to find counterparties they do not yet know.

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <variant>
#include <vector>

#include "a2sc/messaging.hpp"

namespace a2sc {

struct GeoPoint {
  double latitude = 0.0;
  double longitude = 0.0;

  bool operator==(const GeoPoint&) const = default;
};

bool valid(const GeoPoint& p) noexcept;
Value to_value(const GeoPoint& p);
GeoPoint geo_from_value(const Value& v);

/// Great-circle distance on a sphere of radius 6371.0 km.
double haversine_km(GeoPoint a, GeoPoint b) noexcept;

inline constexpr double kEarthRadiusKm = 6371.0;

struct ServiceDescription {
  std::string id;  // assigned by the registry
  AgentAddress owner;
  std::string kind;
  Value attributes = Value::object();  // product, unit_price, location, performance, ...

  bool operator==(const ServiceDescription&) const = default;
};

Value to_value(const ServiceDescription& d);
ServiceDescription description_from_value(const Value& v);

struct Equals {
  Value operand;
  bool operator==(const Equals&) const = default;
};

struct InRange {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const InRange&) const = default;
};

struct WithinKm {
  GeoPoint center;
  double radius_km = 0.0;
  bool operator==(const WithinKm&) const = default;
};

struct Constraint {
  std::string attribute;
  std::variant<Equals, InRange, WithinKm> op;

  bool operator==(const Constraint&) const = default;
};

/// Conjunctive query: every constraint must hold.
struct Query {
  std::string kind;
  std::vector<Constraint> constraints;

  bool operator==(const Query&) const = default;
};

Value to_value(const Query& q);
Query query_from_value(const Value& v);

enum class AttributeType { string, number, geo, any };

/// Attributes a query may reference, with their types.
using AttributeSchema = std::map<std::string, AttributeType>;

AttributeSchema default_attribute_schema();

/// Does `d` satisfy every constraint of `q` (kind included)?
bool matches(const ServiceDescription& d, const Query& q);

class Registry {
 public:
  explicit Registry(AttributeSchema schema = default_attribute_schema());

  /// Throws Error{invalid_description}. Re-registration by the same
  /// owner+kind replaces the earlier entry and keeps its id.
  std::string register_service(ServiceDescription d);

  /// Throws Error{unknown_id}.
  void unregister(const std::string& id);

  /// Throws Error{malformed_query}. Results ordered by owner name, then id.
  std::vector<ServiceDescription> search(const Query& q) const;

  void validate(const ServiceDescription& d) const;
  void validate(const Query& q) const;

  std::size_t size() const;

  void save(const std::filesystem::path& file) const;
  void load(const std::filesystem::path& file);

 private:
  AttributeSchema schema_;
  mutable std::mutex mutex_;
  std::map<std::string, ServiceDescription> entries_;  // id -> description
  std::uint64_t next_id_ = 1;
};

}  // namespace a2sc
