#include "faasim/core.hpp"

#include <cmath>

namespace faasim {

int ServerState::busy_containers(SimTick now) const {
  int n = 0;
  for (const auto& c : containers) {
    if (c.busy_until && *c.busy_until > now) ++n;
  }
  return n;
}

double ServerState::load(SimTick now) const {
  if (containers.empty()) return 0.0;
  return static_cast<double>(busy_containers(now)) /
         static_cast<double>(containers.size());
}

std::vector<std::string> validate_server(const ServerState& s) {
  std::vector<std::string> errors;
  if (s.id.empty()) errors.push_back("server id empty");
  if (!(s.ring_position >= 0.0 && s.ring_position < 1.0))
    errors.push_back("ring_position out of [0,1)");
  if (!(s.mem_limit >= 0.0) || !std::isfinite(s.mem_limit))
    errors.push_back("mem_limit negative or non-finite");
  if (s.mem_used < 0.0 || !std::isfinite(s.mem_used))
    errors.push_back("mem_used negative or non-finite");
  if (s.mem_used > s.mem_limit) errors.push_back("memory overcommit");
  if (!(s.p_idle_w > 0.0)) errors.push_back("p_idle not positive");
  if (!(s.p_peak_w >= s.p_idle_w)) errors.push_back("p_peak below p_idle");
  if (s.containers.empty()) errors.push_back("no container slots");
  return errors;
}

} // namespace faasim
