#include "faasim/hash_ring.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

namespace faasim {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double hash_to_unit(std::string_view key) {
  return static_cast<double>(fnv1a64(key) >> 11) * 0x1.0p-53;
}

double ring_distance(double server_pos, double function_pos) {
  double g = server_pos - function_pos;
  g -= std::floor(g); // wrap into [0,1)
  if (g == 0.0) return 0.0;
  return -std::log(1.0 - g);
}

std::vector<const ServerState*> sort_servers(const std::vector<WeightedServer>& servers,
                                             double function_pos) {
  struct Keyed {
    double key;
    const ServerState* server;
  };
  std::vector<Keyed> keyed;
  keyed.reserve(servers.size());
  for (const auto& ws : servers) {
    if (!(ws.weight > 0.0) || !std::isfinite(ws.weight))
      throw std::invalid_argument("sort_servers: weight must be positive and finite");
    keyed.push_back({ring_distance(ws.server->ring_position, function_pos) / ws.weight,
                     ws.server});
  }
  std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
    return std::tie(a.key, a.server->id) < std::tie(b.key, b.server->id);
  });
  std::vector<const ServerState*> out;
  out.reserve(keyed.size());
  for (const auto& k : keyed) out.push_back(k.server);
  return out;
}

} // namespace faasim
