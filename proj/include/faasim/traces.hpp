#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "faasim/core.hpp"

namespace faasim {

struct TraceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invocation density classes, calibrated against published production
// serverless workload figures: function population and fleet-wide
// requests per minute.
enum class WorkloadProfile { Rare, Medium, High };

struct ProfileStats {
  int num_functions = 0;
  double reqs_per_min = 0.0;
};

ProfileStats profile_stats(WorkloadProfile p);
std::string to_string(WorkloadProfile p);
std::optional<WorkloadProfile> parse_profile(std::string_view name);

// Per-minute invocation counts for a fixed function population.
struct FunctionTrace {
  std::vector<FunctionDef> functions;
  std::int64_t minutes = 0;
  // counts[minute][function_index]
  std::vector<std::vector<int>> counts;

  std::int64_t total_invocations() const;
};

struct CarbonSample {
  SimTick t = 0;
  double moer_lbs_per_mwh = 0.0; // marginal operating emissions rate
};

// Grid carbon intensity of one location, sampled every few minutes. Lookups
// hold the last sample at or before t; times before the first sample clamp
// to it.
struct CarbonTrace {
  std::string location_id;
  std::vector<CarbonSample> samples; // ascending t
  double at(SimTick t) const;
  double mean() const;
};

struct SolarSample {
  SimTick t = 0;
  double gti_w_per_m2 = 0.0; // global tilted irradiance
};

// Solar irradiance of one location. Array output scales irradiance by the
// installed wattage, rated at 1000 W/m^2.
struct SolarTrace {
  std::string location_id;
  double array_watts = 0.0;
  std::vector<SolarSample> samples; // ascending t
  double gti_at(SimTick t) const;
  double output_w(SimTick t) const;
  double mean_gti() const;
};

// Mean execution time derived from the function id alone (range keyed on the
// id prefix, e.g. "high-" functions are short), so a trace written to CSV
// (which carries no execution times) reloads to identical definitions.
double exec_time_for(std::string_view function_id);

// Synthesizes a per-minute invocation trace: a 20% head of the population
// carries 80% of the request rate, per-minute counts are Poisson around each
// function's rate. Function types cycle through [0, num_function_types).
FunctionTrace gen_function_trace(WorkloadProfile profile, std::int64_t duration_s,
                                 std::uint64_t seed, int num_function_types = 5);

// Synthesizes a diurnal carbon-intensity curve (24 h sinusoid, +-25% swing,
// +-10% sample noise, 5-minute cadence), rescaled so the trace mean equals
// avg_moer exactly.
CarbonTrace gen_carbon_trace(std::string location_id, double avg_moer,
                             std::int64_t duration_s, std::uint64_t seed);

// Synthesizes irradiance: zero outside 06:00-18:00, a half-sine during the
// day, seeded per-day cloud attenuation and per-sample dips, rescaled so the
// all-hours mean equals avg_gti exactly.
SolarTrace gen_solar_trace(std::string location_id, double avg_gti, double array_watts,
                           std::int64_t duration_s, std::uint64_t seed);

// One deployment site: grid characteristics, solar+battery sizing, and how
// many servers it hosts.
struct LocationSpec {
  std::string location_id;
  double avg_moer = 0.0; // lbs/MWh
  double avg_gti = 0.0;  // W/m^2
  double solar_array_w = 1000.0;
  double battery_wh = 3800.0;
  int servers = 2;
};

// The nine-site fleet used by the default experiment: real data-center
// locations spanning clean and dirty grids, sunny and overcast climates.
const std::vector<LocationSpec>& default_locations();

void save_locations_json(const std::filesystem::path& path,
                         const std::vector<LocationSpec>& locations);
std::vector<LocationSpec> load_locations_json(const std::filesystem::path& path);

// CSV round-trip. Schemas:
//   functions: minute_index,function_id,func_type,invocations   (zeros included)
//   carbon:    timestamp_s,location_id,moer_lbs_per_mwh
//   solar:     timestamp_s,location_id,gti_w_per_m2
// Loaders throw TraceError with a line number on malformed input.
void save_function_csv(const std::filesystem::path& path, const FunctionTrace& trace);
FunctionTrace load_function_csv(const std::filesystem::path& path);
void save_carbon_csv(const std::filesystem::path& path,
                     const std::vector<CarbonTrace>& traces);
std::vector<CarbonTrace> load_carbon_csv(const std::filesystem::path& path);
void save_solar_csv(const std::filesystem::path& path,
                    const std::vector<SolarTrace>& traces);
std::vector<SolarTrace> load_solar_csv(const std::filesystem::path& path,
                                       double default_array_watts = 1000.0);

} // namespace faasim
