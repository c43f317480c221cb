#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <numbers>
#include <thread>

#include "a2sc/directory.hpp"
#include "a2sc/discovery.hpp"
#include "a2sc/error.hpp"
#include "support/matchmaking.hpp"

using namespace a2sc;

namespace {

ServiceDescription supplier(const std::string& name, GeoPoint where, const std::string& product = "beef",
                            double price = 6.0) {
  ServiceDescription d;
  d.owner = local_address(name);
  d.kind = "meat-supply";
  d.attributes = Value{{"product", product}, {"unit_price", price}, {"location", to_value(where)}};
  return d;
}

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return Errc::config_error;
}

std::vector<std::string> owners(const std::vector<ServiceDescription>& ds) {
  std::vector<std::string> out;
  for (const auto& d : ds) out.push_back(d.owner.name);
  return out;
}

}  // namespace

TEST(Haversine, KnownValues) {
  const GeoPoint cambridge{52.2053, 0.1218};
  EXPECT_EQ(haversine_km(cambridge, cambridge), 0.0);
  EXPECT_NEAR(haversine_km({0, 0}, {0, 180}), 6371.0 * std::numbers::pi, 1e-6);
  // Reference value from the vector-form great-circle angle: 79.4735 km.
  EXPECT_NEAR(haversine_km(cambridge, {51.5074, -0.1278}), 79.4735, 0.1);
}

TEST(Haversine, AgreesWithIndependentFormula) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> lat(-89.0, 89.0), lon(-180.0, 180.0);
  for (int i = 0; i < 2000; ++i) {
    const GeoPoint a{lat(rng), lon(rng)}, b{lat(rng), lon(rng)};
    EXPECT_NEAR(haversine_km(a, b), oracle::great_circle_km(a.latitude, a.longitude, b.latitude, b.longitude), 1e-6);
  }
}

TEST(Registry, RegisterFindReplaceUnregister) {
  Registry r;
  const auto id = r.register_service(supplier("supplier", {52.21, 0.09}));
  EXPECT_EQ(id, "r1");
  EXPECT_EQ(owners(r.search(Query{"meat-supply", {}})), std::vector<std::string>{"supplier"});

  EXPECT_EQ(r.register_service(supplier("supplier", {52.21, 0.09}, "beef", 5.5)), "r1");
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r.search(Query{"meat-supply", {}})[0].attributes["unit_price"], 5.5);

  r.unregister(id);
  EXPECT_TRUE(r.search(Query{"meat-supply", {}}).empty());
  EXPECT_EQ(code_of([&] { r.unregister(id); }), Errc::unknown_id);
}

TEST(Registry, InvalidDescriptions) {
  Registry r;
  EXPECT_EQ(code_of([&] { r.register_service(supplier("s", {123.0, 0.0})); }), Errc::invalid_description);
  auto d = supplier("s", {52.0, 0.0});
  d.attributes["performance"] = 1.5;
  EXPECT_EQ(code_of([&] { r.register_service(d); }), Errc::invalid_description);
  d = supplier("s", {52.0, 0.0});
  d.attributes["unit_price"] = "cheap";
  EXPECT_EQ(code_of([&] { r.register_service(d); }), Errc::invalid_description);
  d = supplier("", {52.0, 0.0});
  EXPECT_EQ(code_of([&] { r.register_service(d); }), Errc::invalid_description);
}

TEST(Registry, MalformedQueries) {
  Registry r;
  EXPECT_EQ(code_of([&] { r.search(Query{"meat-supply", {{"colour", Equals{"red"}}}}); }), Errc::malformed_query);
  EXPECT_EQ(code_of([&] { r.search(Query{"meat-supply", {{"location", WithinKm{{52, 0}, 0.0}}}}); }),
            Errc::malformed_query);
  EXPECT_EQ(code_of([&] { r.search(Query{"meat-supply", {{"unit_price", InRange{5, 1}}}}); }),
            Errc::malformed_query);
  EXPECT_EQ(code_of([&] { r.search(Query{"meat-supply", {{"product", InRange{0, 1}}}}); }), Errc::malformed_query);
  EXPECT_EQ(code_of([&] { query_from_value(Value{{"kind", "x"}, {"constraints", {{{"op", "like"}}}}}); }),
            Errc::malformed_query);
}

TEST(Registry, WithinKmPicksTheNearSupplier) {
  Registry r;
  const GeoPoint q{52.2053, 0.1218};
  // Due north of q: 1 degree of latitude is 6371*pi/180 = 111.19 km.
  const GeoPoint near{q.latitude + 3.0 / 111.19, q.longitude};
  const GeoPoint far{q.latitude + 40.0 / 111.19, q.longitude};
  EXPECT_NEAR(oracle::great_circle_km(q.latitude, q.longitude, near.latitude, near.longitude), 3.0, 0.01);
  r.register_service(supplier("near", near));
  r.register_service(supplier("far", far));
  EXPECT_EQ(owners(r.search(Query{"meat-supply", {{"location", WithinKm{q, 10.0}}}})),
            std::vector<std::string>{"near"});
}

TEST(Registry, EqualsAndOrdering) {
  Registry r;
  r.register_service(supplier("zeta", {52, 0}, "beef"));
  r.register_service(supplier("alpha", {52, 0}, "beef"));
  r.register_service(supplier("mid", {52, 0}, "pork"));
  EXPECT_EQ(owners(r.search(Query{"meat-supply", {{"product", Equals{"beef"}}}})),
            (std::vector<std::string>{"alpha", "zeta"}));
  EXPECT_EQ(owners(r.search(Query{"meat-wholesale", {}})), std::vector<std::string>{});
}

TEST(Registry, RandomRegistriesMatchLinearScan) {
  std::mt19937_64 rng(99);
  for (int round = 0; round < 5; ++round) {
    Registry r;
    std::vector<ServiceDescription> all;
    for (int i = 0; i < 300; ++i) {
      auto d = oracle::random_description(rng, i);
      d.id = r.register_service(d);
      all.push_back(d);
    }
    for (int k = 0; k < 100; ++k) {
      const auto q = oracle::random_query(rng, all);
      std::set<std::string> got;
      for (const auto& d : r.search(q)) got.insert(d.id);
      ASSERT_EQ(got, oracle::linear_scan(all, q)) << to_value(q).dump();
      EXPECT_EQ(r.search(q), r.search(q));
    }
  }
}

TEST(Registry, SnapshotRoundTrip) {
  const auto file = std::filesystem::temp_directory_path() / "a2sc-registry-test.json";
  Registry a;
  a.register_service(supplier("s1", {52, 0}));
  a.register_service(supplier("s2", {51, 0}));
  a.unregister("r1");
  a.save(file);
  Registry b;
  b.load(file);
  EXPECT_EQ(b.search(Query{"meat-supply", {}}), a.search(Query{"meat-supply", {}}));
  EXPECT_EQ(b.register_service(supplier("s3", {50, 0})), "r3");
  std::filesystem::remove(file);
}

// Concurrent unregister while searching: every search sees the entry either
// fully present or absent, and once the unregister returned, never again.
TEST(Registry, ConcurrentSearchSeesBeforeOrAfter) {
  for (int round = 0; round < 20; ++round) {
    Registry r;
    for (int i = 0; i < 50; ++i) r.register_service(supplier("s" + std::to_string(i), {52, 0}));
    const auto victim = r.register_service(supplier("victim", {52, 0}));
    std::atomic<bool> gone{false};
    std::atomic<int> torn{0};
    std::atomic<int> resurrected{0};
    std::vector<std::jthread> readers;
    for (int t = 0; t < 3; ++t) {
      readers.emplace_back([&] {
        for (int i = 0; i < 200; ++i) {
          const bool gone_before = gone.load();
          const auto res = r.search(Query{"meat-supply", {}});
          const bool has = std::any_of(res.begin(), res.end(), [&](const auto& d) { return d.id == victim; });
          if (res.size() != (has ? 51u : 50u)) ++torn;
          if (gone_before && has) ++resurrected;
        }
      });
    }
    r.unregister(victim);
    gone = true;
    readers.clear();
    EXPECT_EQ(torn.load(), 0);
    EXPECT_EQ(resurrected.load(), 0);
  }
}

TEST(DirectorySkill, HandlesRequests) {
  DirectorySkill skill;
  const auto reg = skill.handle(register_request(supplier("s", {52, 0})));
  EXPECT_EQ(reg["type"], "registered");
  const auto found = search_results(skill.handle(search_request(Query{"meat-supply", {}})));
  ASSERT_EQ(found.size(), 1u);
  EXPECT_EQ(found[0].owner.name, "s");
  EXPECT_EQ(skill.handle(unregister_request(reg["id"]))["type"], "unregistered");

  const auto err = skill.handle(unregister_request("r99"));
  EXPECT_EQ(err["type"], "error");
  EXPECT_EQ(err["code"], "unknown-id");
  EXPECT_EQ(skill.handle(Value{{"type", "dance"}})["type"], "error");
  EXPECT_EQ(code_of([&] { search_results(skill.handle(Value{{"type", "search"}, {"query", 3}})); }),
            Errc::malformed_query);
}
