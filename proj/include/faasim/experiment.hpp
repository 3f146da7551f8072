#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "faasim/engine.hpp"

namespace faasim {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string to_string(Mode m); // "grid" / "isolated", the CLI vocabulary
std::optional<Mode> parse_mode(std::string_view name);

// One sweep: a fleet + workload, simulated once per requested policy with
// identical traces and seed so the runs are directly comparable.
struct ExperimentSpec {
  Mode mode = Mode::GridConnected;
  std::vector<Policy> policies = {Policy::CarbonAware};
  std::uint64_t seed = 42;
  int days = 1;
  WorkloadProfile profile = WorkloadProfile::High;

  // Optional pre-recorded inputs; anything empty is synthesized instead.
  std::filesystem::path functions_csv;
  std::filesystem::path carbon_csv;
  std::filesystem::path solar_csv;
  std::filesystem::path locations_json;

  int locations_limit = 0;      // use only the first N locations (0 = all)
  int servers_per_location = 0; // override the per-location server count (0 = keep)

  SimConfig sim; // knobs; servers/policy/mode/seed/duration are filled per run

  std::filesystem::path out_dir = "out";
};

// Strict parse: unknown keys are config errors so typos don't silently
// fall back to defaults.
ExperimentSpec spec_from_json(const nlohmann::json& j);
ExperimentSpec load_spec(const std::filesystem::path& config_path);

std::int64_t duration_s_of(const ExperimentSpec& spec);

// Locations after manifest/limit/override resolution.
std::vector<LocationSpec> resolve_locations(const ExperimentSpec& spec);

// Loads or synthesizes every input the sweep needs.
SimInputs build_inputs(const ExperimentSpec& spec);

struct SweepResult {
  std::vector<RunMetrics> runs;   // one per requested policy, in order
  RunMetrics baseline;            // the redirect baseline on the same inputs
  std::vector<std::filesystem::path> metrics_files;
  std::filesystem::path summary_file;
};

// Runs every requested policy, writes <out>/<policy>/{metrics.json,events.csv}
// and <out>/summary.csv. The baseline needed for the avoided-emissions
// column is taken from the sweep when requested, otherwise run on the side
// without writing files.
SweepResult run_sweep(const ExperimentSpec& spec);

nlohmann::json metrics_to_json(const RunMetrics& m);
RunMetrics metrics_from_json(const nlohmann::json& j);
void write_metrics_json(const std::filesystem::path& path, const RunMetrics& m);
RunMetrics load_metrics_json(const std::filesystem::path& path);
void write_summary_csv(const std::filesystem::path& path,
                       const std::vector<RunMetrics>& runs);

// Generates and saves the full synthetic input set for an experiment.
int cmd_gen_traces(const ExperimentSpec& spec);
// Prints a comparison table over previously written output directories;
// optionally re-emits the per-hour emission series.
int cmd_report(const std::vector<std::filesystem::path>& dirs, bool hourly,
               const std::filesystem::path& out_dir);

} // namespace faasim
