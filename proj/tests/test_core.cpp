#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "faasim/core.hpp"

#include <algorithm>

using namespace faasim;

namespace {

ServerState sane_server() {
  ServerState s;
  s.id = "srv-a";
  s.location_id = "loc-a";
  s.ring_position = 0.25;
  s.mem_limit = 3.0;
  s.mem_used = 0.0;
  s.containers.assign(3, ContainerSlot{});
  s.p_idle_w = 90.0;
  s.p_peak_w = 200.0;
  return s;
}

bool has_error(const std::vector<std::string>& errors, const std::string& needle) {
  return std::any_of(errors.begin(), errors.end(), [&](const std::string& e) {
    return e.find(needle) != std::string::npos;
  });
}

} // namespace

TEST_CASE("a well-formed server validates cleanly") {
  CHECK(validate_server(sane_server()).empty());
}

TEST_CASE("validate_server reports each violated invariant") {
  ServerState s = sane_server();
  s.ring_position = 1.0; // the ring is [0,1); 1.0 wraps to 0 and is rejected
  CHECK(has_error(validate_server(s), "ring_position out of [0,1)"));

  s = sane_server();
  s.ring_position = -0.001;
  CHECK(has_error(validate_server(s), "ring_position"));

  s = sane_server();
  s.mem_used = 3.5;
  CHECK(has_error(validate_server(s), "memory overcommit"));

  s = sane_server();
  s.mem_used = -1.0;
  CHECK(has_error(validate_server(s), "mem_used"));

  s = sane_server();
  s.p_idle_w = 0.0;
  CHECK(has_error(validate_server(s), "p_idle"));

  s = sane_server();
  s.p_peak_w = s.p_idle_w - 1.0;
  CHECK(has_error(validate_server(s), "p_peak"));

  s = sane_server();
  s.containers.clear();
  CHECK(has_error(validate_server(s), "container"));

  s = sane_server();
  s.id.clear();
  CHECK(has_error(validate_server(s), "id"));
}

TEST_CASE("multiple violations are all reported") {
  ServerState s = sane_server();
  s.ring_position = 2.0;
  s.mem_used = s.mem_limit + 1.0;
  s.p_idle_w = -5.0;
  auto errors = validate_server(s);
  CHECK(errors.size() >= 3);
}

TEST_CASE("boundary values are accepted") {
  ServerState s = sane_server();
  s.ring_position = 0.0;
  s.mem_used = s.mem_limit; // full is legal; over is not
  s.p_peak_w = s.p_idle_w;  // flat power curve is legal
  CHECK(validate_server(s).empty());
}

TEST_CASE("busy_containers and load follow busy_until") {
  ServerState s = sane_server();
  CHECK(s.busy_containers(0) == 0);
  CHECK(s.load(0) == 0.0);

  s.containers[0].busy_until = 10; // busy during [placement, 10)
  s.containers[1].busy_until = 5;
  CHECK(s.busy_containers(4) == 2);
  CHECK(s.load(4) == doctest::Approx(2.0 / 3.0));
  // A slot whose busy_until has arrived no longer counts.
  CHECK(s.busy_containers(5) == 1);
  CHECK(s.busy_containers(10) == 0);
}

TEST_CASE("requests carry retry bookkeeping") {
  InvocationRequest req;
  req.function.id = "fn-0001";
  req.arrival = 42;
  CHECK(req.retry_count == 0);
  CHECK_FALSE(req.first_enqueued.has_value());
}
