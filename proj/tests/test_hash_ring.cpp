#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "faasim/hash_ring.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "faasim/rng.hpp"

using namespace faasim;

namespace {

constexpr int kPropertyCases = 10000;

ServerState at(const std::string& id, double pos) {
  ServerState s;
  s.id = id;
  s.ring_position = pos;
  return s;
}

std::string random_key(Rng& rng) {
  int len = static_cast<int>(rng.uniform_int(0, 24));
  std::string key;
  for (int i = 0; i < len; ++i)
    key.push_back(static_cast<char>(rng.uniform_int(32, 126)));
  return key;
}

} // namespace

// Reference digests computed independently (tests/support/gen_oracle_values.py).
TEST_CASE("fnv1a64 matches reference digests") {
  CHECK(fnv1a64("") == 14695981039346656037ULL);
  CHECK(fnv1a64("a") == 12638187200555641996ULL);
  CHECK(fnv1a64("fn-0001") == 5798433200965201467ULL);
  CHECK(fnv1a64("server-07") == 3858011207351166704ULL);
  CHECK(fnv1a64("henderson-nv-s00") == 6139439823481817564ULL);
}

TEST_CASE("hash_to_unit matches reference values and stays in [0,1)") {
  CHECK(hash_to_unit("") == 0.7966707284832713);
  CHECK(hash_to_unit("a") == 0.6851175009560461);
  CHECK(hash_to_unit("fn-0001") == 0.31433369367492736);
  CHECK(hash_to_unit("alpha") == 0.5420859892673673);
  CHECK(hash_to_unit("beta") == 0.4615384106484943);
  CHECK(hash_to_unit("gamma") == 0.13503210179571445);

  Rng rng(0x68617368ULL);
  for (int i = 0; i < kPropertyCases; ++i) {
    double u = hash_to_unit(random_key(rng));
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("ring_distance matches reference values") {
  CHECK(ring_distance(0.30, 0.25) == doctest::Approx(0.05129329438755058).epsilon(1e-14));
  CHECK(ring_distance(0.20, 0.25) == doctest::Approx(2.99573227355399).epsilon(1e-14));
  CHECK(ring_distance(0.75, 0.25) == doctest::Approx(0.6931471805599453).epsilon(1e-14));
  CHECK(ring_distance(0.0, 0.999) == doctest::Approx(0.0010005003335835344).epsilon(1e-14));
  // Coincident points cost nothing: the walk starts right there.
  CHECK(ring_distance(0.25, 0.25) == 0.0);
  CHECK(ring_distance(0.0, 0.0) == 0.0);
}

TEST_CASE("ring_distance is strictly monotonic in the clockwise gap") {
  Rng rng(0x6d6f6e6fULL);
  for (int i = 0; i < kPropertyCases; ++i) {
    double f = rng.uniform01();
    double g1 = rng.uniform(1e-9, 1.0 - 1e-9);
    double g2 = rng.uniform(1e-9, 1.0 - 1e-9);
    if (g1 == g2) continue;
    if (g1 > g2) std::swap(g1, g2);
    double s1 = std::fmod(f + g1, 1.0);
    double s2 = std::fmod(f + g2, 1.0);
    CHECK(ring_distance(s1, f) < ring_distance(s2, f));
  }
}

TEST_CASE("sort_servers ranks by distance over weight") {
  // Worked example: function at 0.25. The 0.30 server is one step ahead
  // (key 0.051293); the 0.20 server is nearly a full turn away and its 0.25
  // weight makes it worse still (key 11.98293).
  ServerState a = at("a", 0.30);
  ServerState b = at("b", 0.20);
  auto order = sort_servers({{&a, 1.0}, {&b, 0.25}}, 0.25);
  REQUIRE(order.size() == 2);
  CHECK(order[0]->id == "a");
  CHECK(order[1]->id == "b");

  // A big enough weight flips the ranking.
  order = sort_servers({{&a, 1.0}, {&b, 1000.0}}, 0.25);
  CHECK(order[0]->id == "b");
}

TEST_CASE("sort_servers breaks exact ties by server id") {
  ServerState a = at("alpha", 0.5);
  ServerState b = at("bravo", 0.5);
  ServerState c = at("charlie", 0.5);
  auto order = sort_servers({{&c, 2.0}, {&a, 2.0}, {&b, 2.0}}, 0.1);
  REQUIRE(order.size() == 3);
  CHECK(order[0]->id == "alpha");
  CHECK(order[1]->id == "bravo");
  CHECK(order[2]->id == "charlie");
}

TEST_CASE("sort_servers rejects non-positive weights") {
  ServerState a = at("a", 0.3);
  CHECK_THROWS_AS((void)sort_servers({{&a, 0.0}}, 0.25), std::invalid_argument);
  CHECK_THROWS_AS((void)sort_servers({{&a, -1.0}}, 0.25), std::invalid_argument);
  CHECK(sort_servers({}, 0.25).empty());
}

TEST_CASE("property: scaling every weight leaves the order unchanged") {
  Rng rng(0x7363616cULL);
  for (int i = 0; i < kPropertyCases; ++i) {
    int n = static_cast<int>(rng.uniform_int(1, 8));
    std::vector<ServerState> servers(static_cast<std::size_t>(n));
    std::vector<WeightedServer> ws, scaled;
    double c = rng.uniform(0.01, 100.0);
    for (int k = 0; k < n; ++k) {
      servers[k] = at("s" + std::to_string(k), rng.uniform01());
      double w = rng.uniform(0.001, 10.0);
      ws.push_back({&servers[k], w});
      scaled.push_back({&servers[k], w * c});
    }
    double f = rng.uniform01();
    CHECK(sort_servers(ws, f) == sort_servers(scaled, f));
  }
}

TEST_CASE("property: raising one weight never worsens that server's rank") {
  Rng rng(0x7261697365ULL);
  for (int i = 0; i < kPropertyCases; ++i) {
    int n = static_cast<int>(rng.uniform_int(2, 8));
    std::vector<ServerState> servers(static_cast<std::size_t>(n));
    std::vector<WeightedServer> ws;
    for (int k = 0; k < n; ++k) {
      servers[k] = at("s" + std::to_string(k), rng.uniform01());
      ws.push_back({&servers[k], rng.uniform(0.001, 10.0)});
    }
    double f = rng.uniform01();
    auto before = sort_servers(ws, f);
    auto bump = static_cast<std::size_t>(rng.uniform_int(0, n - 1));
    const ServerState* target = ws[bump].server;
    ws[bump].weight *= rng.uniform(1.0, 50.0);
    auto after = sort_servers(ws, f);
    auto rank = [&](const std::vector<const ServerState*>& order) {
      return std::find(order.begin(), order.end(), target) - order.begin();
    };
    CHECK(rank(after) <= rank(before));
  }
}

TEST_CASE("property: input permutation does not change the ranking") {
  Rng rng(0x7065726dULL);
  for (int i = 0; i < kPropertyCases; ++i) {
    int n = static_cast<int>(rng.uniform_int(1, 8));
    std::vector<ServerState> servers(static_cast<std::size_t>(n));
    std::vector<WeightedServer> ws;
    for (int k = 0; k < n; ++k) {
      servers[k] = at("s" + std::to_string(k), rng.uniform01());
      ws.push_back({&servers[k], rng.uniform(0.001, 10.0)});
    }
    double f = rng.uniform01();
    auto expected = sort_servers(ws, f);
    // Fisher-Yates with the test generator.
    for (std::size_t k = ws.size(); k > 1; --k) {
      auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(k) - 1));
      std::swap(ws[k - 1], ws[j]);
    }
    CHECK(sort_servers(ws, f) == expected);
  }
}
