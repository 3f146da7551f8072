#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "faasim/balancer.hpp"
#include "faasim/core.hpp"
#include "faasim/energy.hpp"
#include "faasim/traces.hpp"

namespace faasim {

struct SimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SimConfig {
  Mode mode = Mode::GridConnected;
  Policy policy = Policy::CarbonAware;
  std::uint64_t seed = 42;
  std::int64_t duration_s = 86400;
  std::int64_t tick_s = 1;
  std::vector<ServerState> servers;
  int num_function_types = 5;
  // Server template applied by make_fleet; explicit `servers` entries rule.
  int containers_per_server = 3;
  double mem_limit = 3.0;
  // Sized so a 2-server site idles within its 1 kW array's output even on
  // overcast days; the dynamic band is what placement decisions move around.
  double p_idle_w = 60.0;
  double p_peak_w = 200.0;
  double mem_per_function = 1.0;
  double cold_start_penalty_s = 0.5;
  double warm_start_penalty_s = 0.005;
  // Site self-reports: published every period, visible after the delay.
  double profile_period_s = 1.0;
  double profile_delay_s = 0.0;
  int max_retries = 3;
  double retry_interval_s = 60.0;
  // Battery management (grid-isolated).
  double buffer_fraction = 0.2;
  double critical_level_fraction = 0.2; // crossing below counts as an event
  double restart_level_fraction = 0.05; // a dark site powers on again here
  double max_discharge_rate_w = 1900.0;
  bool retry_on_high_carbon = false;
  double high_carbon_threshold = 0.0;
};

// Everything a run consumes besides the config: the workload and the
// per-location environment, bound together by location_id.
struct SimInputs {
  FunctionTrace functions;
  std::vector<CarbonTrace> carbon;
  std::vector<SolarTrace> solar;
  std::vector<LocationSpec> locations;
};

struct LatencyStats {
  double mean_s = 0.0;
  double p50_s = 0.0;
  double p95_s = 0.0;
  double p99_s = 0.0;
};

struct RunMetrics {
  Policy policy = Policy::CarbonAware;
  Mode mode = Mode::GridConnected;
  std::uint64_t seed = 0;
  std::int64_t duration_s = 0;

  std::int64_t arrivals = 0;
  std::int64_t executed = 0;
  std::int64_t failed = 0;
  std::int64_t still_queued = 0; // waiting in the retry queue at the end
  std::int64_t in_flight = 0;    // running in a container at the end
  std::int64_t cold_starts = 0;  // counted at completion; cold+warm == executed
  std::int64_t warm_starts = 0;
  std::int64_t retries = 0; // enqueue events

  double total_energy_wh = 0.0;
  double total_emissions_lbs = 0.0;
  std::optional<double> emissions_avoided_lbs; // baseline minus this run
  std::vector<double> hourly_emissions_lbs;

  double downtime_server_s = 0.0;
  std::int64_t shutdown_count = 0; // server power-loss events
  std::int64_t critical_battery_events = 0; // dips below the critical level
  std::int64_t conservation_violations = 0; // battery ledger mismatches

  LatencyStats latency;
};

// ---- event stream ------------------------------------------------------

struct InvocationEvent {
  SimTick t = 0; // completion or failure tick
  std::string location_id;
  std::string server_id;
  std::string function_id;
  int func_type = 0;
  bool executed = false;
  std::string start_kind; // "cold", "warm", or "" when never started
  int retry_count = 0;
  SimTick arrival = 0;
  SimTick busy_ticks = 0;
  double latency_s = 0.0; // meaningful only when executed
};

struct ServerHourEvent {
  SimTick hour_start = 0;
  std::string location_id;
  std::string server_id;
  double energy_wh = 0.0;
  double emissions_lbs = 0.0;
};

struct PowerEvent {
  SimTick t = 0;
  std::string location_id;
  bool up = false; // false: site lost power; true: site recovered
  double battery_wh = 0.0;
};

class EventSink {
 public:
  virtual ~EventSink() = default;
  virtual void on_invocation(const InvocationEvent&) {}
  virtual void on_server_hour(const ServerHourEvent&) {}
  virtual void on_power(const PowerEvent&) {}
};

// Streams all events into one CSV with a leading record-kind column.
class CsvEventSink : public EventSink {
 public:
  explicit CsvEventSink(const std::filesystem::path& path);
  void on_invocation(const InvocationEvent& e) override;
  void on_server_hour(const ServerHourEvent& e) override;
  void on_power(const PowerEvent& e) override;

 private:
  std::ofstream out_;
};

// Collects events in memory; handy for tests and re-aggregation.
class CollectSink : public EventSink {
 public:
  std::vector<InvocationEvent> invocations;
  std::vector<ServerHourEvent> server_hours;
  std::vector<PowerEvent> power;
  void on_invocation(const InvocationEvent& e) override { invocations.push_back(e); }
  void on_server_hour(const ServerHourEvent& e) override { server_hours.push_back(e); }
  void on_power(const PowerEvent& e) override { power.push_back(e); }
};

// ---- pieces of the tick loop, exposed for direct testing ----------------

enum class PlaceResult { WarmStart, ColdStart, NoCapacity };

// Seizes a container on the server for one function: a free slot already
// holding the image type is a warm start; otherwise any free slot is
// re-imaged (cold). Picks the lowest-index eligible slot and marks it busy
// until now + busy_for_ticks.
PlaceResult place_in_container(ServerState& s, int func_type, SimTick now,
                               SimTick busy_for_ticks);
// The slot and start kind place_in_container would use, without mutating.
PlaceResult peek_place(const ServerState& s, int func_type);

// Spreads a minute's worth of arrivals evenly across its 60 seconds:
// arrival k of c lands on second minute_index*60 + floor(k*60/c).
std::vector<SimTick> spread_arrivals(int count, std::int64_t minute_index);

double latency_of(double queue_delay_s, bool cold_start, double cold_penalty_s,
                  double warm_penalty_s, double exec_s);

// Builds the fleet for a set of locations: `servers` per location, ring
// positions from the server id hash.
std::vector<ServerState> make_fleet(const std::vector<LocationSpec>& locations,
                                    const SimConfig& cfg);

// Runs one simulation to completion. Deterministic: identical config and
// inputs give identical metrics and an identical event stream.
RunMetrics run_simulation(const SimConfig& cfg, const SimInputs& inputs,
                          EventSink* sink = nullptr);

} // namespace faasim
