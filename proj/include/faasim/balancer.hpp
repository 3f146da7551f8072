#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "faasim/core.hpp"
#include "faasim/energy.hpp"
#include "faasim/rng.hpp"

namespace faasim {

enum class Policy {
  CarbonAware,       // weighted ring walk, weights from energy/carbon profiles
  OpenWhiskBaseline, // hash-designated home server, random redirect when full
  ConsistentHashing, // unweighted ring walk
  Greedy,            // best location first (lowest carbon / most energy)
};

std::string to_string(Policy p);
std::optional<Policy> parse_policy(std::string_view name);
const std::vector<Policy>& all_policies();

// Grid-isolated weights: each location's available power, clamped at zero,
// normalized to sum to one. If nothing is positive, every weight is zero and
// the caller has no candidates.
std::vector<double> weights_grid_isolated(const std::vector<double>& avail_w);

// Grid-connected weights: inverse carbon intensity, normalized to sum to
// one, so cleaner grids get proportionally more of the ring. Throws
// std::invalid_argument on a non-positive intensity.
std::vector<double> weights_grid_connected(const std::vector<double>& intensity);

struct BalancerConfig {
  double mem_per_function = 1.0;
  int max_retries = 3;
  double retry_interval_s = 60.0;
  // Optional extension, off by default: in grid-connected mode, requeue a
  // request instead of running it when the chosen location's carbon
  // intensity exceeds the threshold.
  bool retry_on_high_carbon = false;
  double high_carbon_threshold = 0.0;
};

// Holds requests that found no feasible server. Entries become due a fixed
// interval after they were (last) enqueued and drain oldest-first, so a
// request that has waited longer is retried before younger ones.
class RetryQueue {
 public:
  explicit RetryQueue(double retry_interval_s = 60.0) : interval_s_(retry_interval_s) {}

  // Stamps first_enqueued (if unset), bumps retry_count, schedules the retry.
  void push(InvocationRequest req, SimTick now);
  // Removes and returns every entry due at `now`, ordered by first_enqueued
  // (then insertion order).
  std::vector<InvocationRequest> drain_due(SimTick now);

  std::size_t size() const { return size_; }
  double retry_interval_s() const { return interval_s_; }

 private:
  struct Entry {
    InvocationRequest request;
    std::uint64_t seq = 0;
  };
  double interval_s_ = 60.0;
  std::uint64_t next_seq_ = 0;
  std::size_t size_ = 0;
  std::map<SimTick, std::vector<Entry>> by_due_;
};

struct Selection {
  enum class Kind { Assigned, Enqueued, Failed };
  Kind kind = Kind::Failed;
  const ServerState* server = nullptr; // set iff Assigned
};

using SnapshotMap = std::map<std::string, EnergyProfileMsg>;

// Dynamic power one more in-flight function adds on this server.
double per_function_power_w(const ServerState& s);

// Function-attributable power already committed at servers of `location_id`,
// estimated from the balancer's own in-flight accounting (mem_used).
double running_load_w(const std::vector<ServerState>& servers,
                      const std::string& location_id, double mem_per_function);

// Picks a server for one request under the given policy, or decides to
// requeue/fail it. Pure with respect to the fleet; `rng` is consumed only by
// the baseline policy's random redirect.
Selection select_server(Policy policy, const std::vector<ServerState>& servers,
                        const InvocationRequest& req, Mode mode,
                        const SnapshotMap& snapshots, const BalancerConfig& cfg,
                        Rng& rng);

} // namespace faasim
