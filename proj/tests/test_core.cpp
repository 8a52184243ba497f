#include "doctest.h"

#include <random>

#include <nlohmann/json.hpp>

#include "fogmq/core.hpp"
#include "test_util.hpp"

using namespace fogmq;
using testutil::make_instance;

TEST_CASE("well-formed instance validates cleanly") {
  Instance inst = testutil::small_instance();
  Assignment sigma({0, 0, 1});
  CHECK(validate(inst, sigma).empty());
}

TEST_CASE("missing clone assignment is a reported violation") {
  Instance inst = testutil::small_instance();
  Assignment sigma({0, 0});  // c3 unassigned
  auto violations = validate(inst, sigma);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0] == "clone c3 unassigned");
}

TEST_CASE("out-of-range cloud is a reported violation") {
  Instance inst = testutil::small_instance();
  Assignment sigma({0, 0, 7});
  auto violations = validate(inst, sigma);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0].find("c3") != std::string::npos);
}

TEST_CASE("asymmetric tau is rejected at construction") {
  CHECK_THROWS_AS(LatencyMatrix({"x", "y"}, {0.0, 1.0, 2.0, 0.0}), ModelError);
}

TEST_CASE("tau diagonal must be zero and entries finite") {
  CHECK_THROWS_AS(LatencyMatrix({"x"}, {1.0}), ModelError);
  CHECK_THROWS_AS(LatencyMatrix({"x", "y"}, {0.0, -1.0, -1.0, 0.0}),
                  ModelError);
}

TEST_CASE("demand graph rejects self-edges, duplicates, bad demand") {
  DemandGraph g;
  CHECK_THROWS_AS(g.add("a", "a", 1.0), ModelError);
  CHECK_THROWS_AS(g.add("a", "b", 0.0), ModelError);
  g.add("a", "b", 1.0);
  CHECK_THROWS_AS(g.add("b", "a", 2.0), ModelError);
}

TEST_CASE("demand lookup is symmetric for all pairs") {
  std::mt19937_64 rng(7);
  DemandGraph g;
  std::vector<std::string> ids;
  for (int i = 0; i < 12; ++i) ids.push_back("n" + std::to_string(i));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      if (rng() % 2) g.add(ids[i], ids[j], 1.0 + double(rng() % 9));
    }
  }
  for (const auto& a : ids) {
    for (const auto& b : ids) {
      if (a == b) continue;
      CHECK(g.lookup(a, b) == g.lookup(b, a));
    }
  }
}

TEST_CASE("duplicate cloud and clone ids are rejected") {
  CHECK_THROWS_AS(make_instance({{"x", 10}, {"x", 20}}, {0, 1, 1, 0}, {}, {}),
                  ModelError);
  CHECK_THROWS_AS(make_instance({{"x", 10}}, {0}, {"c", "c"}, {}), ModelError);
}

TEST_CASE("demand edges must reference existing clones") {
  CHECK_THROWS_AS(
      make_instance({{"x", 10}}, {0}, {"c1"}, {{"c1", "ghost", 1.0}}),
      ModelError);
}

TEST_CASE("capacity and delta must be positive") {
  CHECK_THROWS_AS(make_instance({{"x", 0.0}}, {0}, {}, {}), ModelError);
  CHECK_THROWS_AS(make_instance({{"x", 1.0}}, {0}, {}, {}, 0.0), ModelError);
}

TEST_CASE("instance JSON round-trip is the identity") {
  Instance inst = testutil::small_instance(42.5, 73.0);
  Instance back = Instance::from_json(inst.to_json());
  CHECK(back.to_json() == inst.to_json());
  REQUIRE(back.num_clouds() == inst.num_clouds());
  REQUIRE(back.num_clones() == inst.num_clones());
  CHECK(back.tau(0, 1) == inst.tau(0, 1));
  CHECK(back.delta() == inst.delta());
  CHECK(back.demands().lookup("c1", "c2") == inst.demands().lookup("c1", "c2"));
}

TEST_CASE("loader symmetrizes tau listed once per unordered pair") {
  nlohmann::json j = {
      {"clouds", {{{"id", "x"}, {"capacity", 10.0}},
                  {{"id", "y"}, {"capacity", 20.0}}}},
      {"tau", {{{"a", "x"}, {"b", "y"}, {"ms", 5.5}}}},
      {"clones", nlohmann::json::array()},
      {"demands", nlohmann::json::array()},
      {"delta", 1.0}};
  Instance inst = Instance::from_json(j);
  CHECK(inst.tau(0, 1) == 5.5);
  CHECK(inst.tau(1, 0) == 5.5);
  CHECK(inst.tau(0, 0) == 0.0);
}

TEST_CASE("assignment map round-trip") {
  Instance inst = testutil::small_instance();
  Assignment sigma({0, 1, 0});
  Assignment back = Assignment::from_map(inst, sigma.to_map(inst));
  CHECK(back == sigma);
  CHECK_THROWS_AS(Assignment::from_map(inst, {{"c1", "x"}}), ModelError);
}
