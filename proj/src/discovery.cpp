#include "a2sc/discovery.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <tuple>

#include "a2sc/error.hpp"

namespace a2sc {

bool valid(const GeoPoint& p) noexcept {
  return std::isfinite(p.latitude) && std::isfinite(p.longitude) && p.latitude >= -90.0 &&
         p.latitude <= 90.0 && p.longitude >= -180.0 && p.longitude <= 180.0;
}

Value to_value(const GeoPoint& p) { return Value{{"lat", p.latitude}, {"lon", p.longitude}}; }

GeoPoint geo_from_value(const Value& v) {
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
    return {v[0].get<double>(), v[1].get<double>()};
  }
  if (v.is_object() && v.contains("lat") && v.contains("lon") && v.at("lat").is_number() &&
      v.at("lon").is_number()) {
    return {v.at("lat").get<double>(), v.at("lon").get<double>()};
  }
  throw Error(Errc::validation_error, "location must be {lat,lon} or [lat,lon]");
}

double haversine_km(GeoPoint a, GeoPoint b) noexcept {
  constexpr double kDeg = std::numbers::pi / 180.0;
  const double phi1 = a.latitude * kDeg;
  const double phi2 = b.latitude * kDeg;
  const double dphi = (b.latitude - a.latitude) * kDeg;
  const double dlambda = (b.longitude - a.longitude) * kDeg;
  const double s = std::sin(dphi / 2.0);
  const double t = std::sin(dlambda / 2.0);
  const double h = std::clamp(s * s + std::cos(phi1) * std::cos(phi2) * t * t, 0.0, 1.0);
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

Value to_value(const ServiceDescription& d) {
  return Value{{"id", d.id},
               {"owner", Value{{"name", d.owner.name}, {"endpoint", d.owner.endpoint}}},
               {"kind", d.kind},
               {"attributes", d.attributes}};
}

ServiceDescription description_from_value(const Value& v) {
  try {
    ServiceDescription d;
    d.id = v.value("id", std::string());
    d.owner.name = v.at("owner").at("name").get<std::string>();
    d.owner.endpoint = v.at("owner").value("endpoint", std::string());
    d.kind = v.at("kind").get<std::string>();
    d.attributes = v.value("attributes", Value::object());
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_description, e.what());
  }
}

Value to_value(const Query& q) {
  Value constraints = Value::array();
  for (const auto& c : q.constraints) {
    Value cv{{"attribute", c.attribute}};
    if (const auto* eq = std::get_if<Equals>(&c.op)) {
      cv["op"] = "equals";
      cv["value"] = eq->operand;
    } else if (const auto* r = std::get_if<InRange>(&c.op)) {
      cv["op"] = "in-range";
      cv["lo"] = r->lo;
      cv["hi"] = r->hi;
    } else {
      const auto& w = std::get<WithinKm>(c.op);
      cv["op"] = "within-km";
      cv["point"] = to_value(w.center);
      cv["radius_km"] = w.radius_km;
    }
    constraints.push_back(std::move(cv));
  }
  return Value{{"kind", q.kind}, {"constraints", std::move(constraints)}};
}

Query query_from_value(const Value& v) {
  try {
    Query q;
    q.kind = v.at("kind").get<std::string>();
    for (const auto& cv : v.value("constraints", Value::array())) {
      Constraint c;
      c.attribute = cv.at("attribute").get<std::string>();
      const auto op = cv.at("op").get<std::string>();
      if (op == "equals") {
        c.op = Equals{cv.at("value")};
      } else if (op == "in-range") {
        c.op = InRange{cv.at("lo").get<double>(), cv.at("hi").get<double>()};
      } else if (op == "within-km") {
        c.op = WithinKm{geo_from_value(cv.at("point")), cv.at("radius_km").get<double>()};
      } else {
        throw Error(Errc::malformed_query, "unknown operator '" + op + "'");
      }
      q.constraints.push_back(std::move(c));
    }
    return q;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed_query, e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::malformed_query) throw;
    throw Error(Errc::malformed_query, e.detail());
  }
}

AttributeSchema default_attribute_schema() {
  return {{"product", AttributeType::string},
          {"unit_price", AttributeType::number},
          {"location", AttributeType::geo},
          {"performance", AttributeType::number},
          {"service_level", AttributeType::string},
          {"name", AttributeType::string}};
}

namespace {

bool constraint_holds(const Value& attrs, const Constraint& c) {
  const auto it = attrs.find(c.attribute);
  if (it == attrs.end()) return false;
  if (const auto* eq = std::get_if<Equals>(&c.op)) return *it == eq->operand;
  if (const auto* r = std::get_if<InRange>(&c.op)) {
    if (!it->is_number()) return false;
    const double x = it->get<double>();
    return x >= r->lo && x <= r->hi;
  }
  const auto& w = std::get<WithinKm>(c.op);
  try {
    return haversine_km(w.center, geo_from_value(*it)) <= w.radius_km;
  } catch (const Error&) {
    return false;
  }
}

}  // namespace

bool matches(const ServiceDescription& d, const Query& q) {
  if (d.kind != q.kind) return false;
  return std::all_of(q.constraints.begin(), q.constraints.end(),
                     [&](const Constraint& c) { return constraint_holds(d.attributes, c); });
}

Registry::Registry(AttributeSchema schema) : schema_(std::move(schema)) {}

void Registry::validate(const ServiceDescription& d) const {
  auto bad = [](const std::string& why) { throw Error(Errc::invalid_description, why); };
  if (d.owner.name.empty()) bad("owner is empty");
  if (d.kind.empty()) bad("kind is empty");
  if (!d.attributes.is_object()) bad("attributes must be an object");
  for (const auto& [name, type] : schema_) {
    const auto it = d.attributes.find(name);
    if (it == d.attributes.end()) continue;
    switch (type) {
      case AttributeType::string:
        if (!it->is_string()) bad(name + " must be a string");
        break;
      case AttributeType::number:
        if (!it->is_number() || !std::isfinite(it->get<double>())) bad(name + " must be a number");
        break;
      case AttributeType::geo: {
        GeoPoint p;
        try {
          p = geo_from_value(*it);
        } catch (const Error&) {
          bad(name + " must be a location");
        }
        if (!valid(p)) bad(name + " is outside latitude [-90,90] / longitude [-180,180]");
        break;
      }
      case AttributeType::any: break;
    }
  }
  if (const auto it = d.attributes.find("performance"); it != d.attributes.end()) {
    const double p = it->get<double>();
    if (p < 0.0 || p > 1.0) bad("performance must lie in [0,1]");
  }
  if (const auto it = d.attributes.find("unit_price"); it != d.attributes.end()) {
    if (it->get<double>() < 0.0) bad("unit_price must be non-negative");
  }
}

void Registry::validate(const Query& q) const {
  auto bad = [](const std::string& why) { throw Error(Errc::malformed_query, why); };
  if (q.kind.empty()) bad("kind is empty");
  for (const auto& c : q.constraints) {
    const auto it = schema_.find(c.attribute);
    if (it == schema_.end()) bad("undeclared attribute '" + c.attribute + "'");
    if (const auto* r = std::get_if<InRange>(&c.op)) {
      if (it->second != AttributeType::number && it->second != AttributeType::any) {
        bad("in-range needs a numeric attribute");
      }
      if (!(r->lo <= r->hi)) bad("in-range needs lo <= hi");
    } else if (const auto* w = std::get_if<WithinKm>(&c.op)) {
      if (it->second != AttributeType::geo && it->second != AttributeType::any) {
        bad("within-km needs a location attribute");
      }
      if (!(w->radius_km > 0.0)) bad("radius must be positive");
      if (!valid(w->center)) bad("query point out of range");
    }
  }
}

std::string Registry::register_service(ServiceDescription d) {
  validate(d);
  std::lock_guard lock(mutex_);
  for (auto& [id, existing] : entries_) {
    if (existing.owner.name == d.owner.name && existing.kind == d.kind) {
      d.id = id;
      existing = std::move(d);
      return id;
    }
  }
  d.id = "r" + std::to_string(next_id_++);
  auto id = d.id;
  entries_.emplace(id, std::move(d));
  return id;
}

void Registry::unregister(const std::string& id) {
  std::lock_guard lock(mutex_);
  if (entries_.erase(id) == 0) throw Error(Errc::unknown_id, id);
}

std::vector<ServiceDescription> Registry::search(const Query& q) const {
  validate(q);
  std::vector<ServiceDescription> out;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [_, d] : entries_) {
      if (matches(d, q)) out.push_back(d);
    }
  }
  std::sort(out.begin(), out.end(), [](const ServiceDescription& a, const ServiceDescription& b) {
    return std::tie(a.owner.name, a.id) < std::tie(b.owner.name, b.id);
  });
  return out;
}

std::size_t Registry::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

void Registry::save(const std::filesystem::path& file) const {
  Value snapshot{{"next_id", 0}, {"entries", Value::array()}};
  {
    std::lock_guard lock(mutex_);
    snapshot["next_id"] = next_id_;
    for (const auto& [_, d] : entries_) snapshot["entries"].push_back(to_value(d));
  }
  std::ofstream out(file);
  if (!out) throw Error(Errc::config_error, "cannot write registry snapshot " + file.string());
  out << snapshot.dump(2) << '\n';
}

void Registry::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(Errc::config_error, "cannot read registry snapshot " + file.string());
  const Value snapshot = Value::parse(in, nullptr, false);
  if (snapshot.is_discarded() || !snapshot.is_object()) {
    throw Error(Errc::config_error, "registry snapshot is not a JSON object");
  }
  std::map<std::string, ServiceDescription> loaded;
  for (const auto& dv : snapshot.value("entries", Value::array())) {
    auto d = description_from_value(dv);
    validate(d);
    auto id = d.id;
    loaded.emplace(std::move(id), std::move(d));
  }
  std::lock_guard lock(mutex_);
  entries_ = std::move(loaded);
  next_id_ = snapshot.value("next_id", std::uint64_t{1});
}

}  // namespace a2sc
