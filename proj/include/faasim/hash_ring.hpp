#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "faasim/core.hpp"

namespace faasim {

// FNV-1a over the raw bytes of the key.
std::uint64_t fnv1a64(std::string_view bytes);

// Maps a key onto the unit circle [0,1). Uses the top 53 bits of the digest
// so the result is an exactly-representable double strictly below 1.
double hash_to_unit(std::string_view key);

// Cost of assigning a function at `function_pos` to a server at `server_pos`,
// walking clockwise (increasing position, wrapping at 1). With g the
// clockwise gap in [0,1), the cost is -ln(1 - g): near zero for the next
// server on the ring and unbounded as the gap approaches a full turn.
// Exactly coincident points get cost 0 (the g -> 0 limit).
double ring_distance(double server_pos, double function_pos);

struct WeightedServer {
  const ServerState* server = nullptr;
  double weight = 1.0; // > 0
};

// Servers ordered by ring_distance/weight ascending, so higher weight pulls
// a server earlier in the walk. Ties break on server id so the order is
// total. Throws std::invalid_argument on a non-positive or non-finite weight.
std::vector<const ServerState*> sort_servers(const std::vector<WeightedServer>& servers,
                                             double function_pos);

} // namespace faasim
