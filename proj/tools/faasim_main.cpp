#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "faasim/experiment.hpp"

namespace {

// Flags shared by simulate and gen-traces; CLI values override the config
// file, which overrides built-in defaults.
struct CommonArgs {
  std::string config;
  std::string mode;
  std::string profile;
  std::vector<std::string> policies;
  std::uint64_t seed = 0;
  int days = 0;
  int locations_limit = -1;
  int servers_per_location = -1;
  std::string out;
};

void apply_overrides(faasim::ExperimentSpec& spec, const CommonArgs& args,
                     const CLI::App& cmd) {
  if (cmd.count("--mode")) {
    auto m = faasim::parse_mode(args.mode);
    if (!m) throw faasim::ConfigError("--mode must be grid or isolated");
    spec.mode = *m;
  }
  if (cmd.count("--profile")) {
    auto p = faasim::parse_profile(args.profile);
    if (!p) throw faasim::ConfigError("--profile must be rare, medium, or high");
    spec.profile = *p;
  }
  // --policy only exists on simulate; the other flags are shared.
  const CLI::Option* policy_opt = cmd.get_option_no_throw("--policy");
  if (policy_opt && policy_opt->count()) {
    spec.policies.clear();
    for (const auto& name : args.policies) {
      auto p = faasim::parse_policy(name);
      if (!p) throw faasim::ConfigError("unknown policy: " + name);
      spec.policies.push_back(*p);
    }
  }
  if (cmd.count("--seed")) spec.seed = args.seed;
  if (cmd.count("--days")) {
    if (args.days <= 0) throw faasim::ConfigError("--days must be positive");
    spec.days = args.days;
  }
  if (cmd.count("--locations")) spec.locations_limit = args.locations_limit;
  if (cmd.count("--servers-per-location"))
    spec.servers_per_location = args.servers_per_location;
  if (cmd.count("--out")) spec.out_dir = args.out;
}

void add_common_flags(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config, "experiment config file (JSON)");
  cmd->add_option("--mode", args.mode, "grid | isolated");
  cmd->add_option("--profile", args.profile, "workload profile: rare | medium | high");
  cmd->add_option("--seed", args.seed, "run seed");
  cmd->add_option("--days", args.days, "simulated days");
  cmd->add_option("--locations", args.locations_limit,
                  "use only the first N locations");
  cmd->add_option("--servers-per-location", args.servers_per_location,
                  "override servers per location");
  cmd->add_option("--out", args.out, "output directory");
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic carbon- and energy-aware serverless fleet simulator"};
  app.require_subcommand(1);

  CommonArgs sim_args;
  std::string functions_csv, carbon_csv, solar_csv, locations_json;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "run one experiment sweep and write metrics + event logs");
  add_common_flags(simulate, sim_args);
  simulate->add_option("--policy", sim_args.policies,
                       "comma-separated policies to sweep")
      ->delimiter(',');
  simulate->add_option("--functions", functions_csv, "pre-recorded invocation CSV");
  simulate->add_option("--carbon", carbon_csv, "pre-recorded carbon-intensity CSV");
  simulate->add_option("--solar", solar_csv, "pre-recorded irradiance CSV");
  simulate->add_option("--manifest", locations_json, "location manifest JSON");

  CommonArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen-traces",
                                     "synthesize workload/carbon/solar trace files");
  add_common_flags(gen, gen_args);

  std::vector<std::string> report_dirs;
  bool report_hourly = false;
  std::string report_out;
  CLI::App* report = app.add_subcommand(
      "report", "summarize metrics from previous simulate runs");
  report->add_option("dirs", report_dirs, "output directories to summarize")
      ->required();
  report->add_flag("--hourly", report_hourly, "include the per-hour emission series");
  report->add_option("--out", report_out, "also write report files here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2; // help/version exit cleanly; usage errors are 2
  }

  try {
    if (simulate->parsed()) {
      faasim::ExperimentSpec spec;
      if (simulate->count("--config")) spec = faasim::load_spec(sim_args.config);
      apply_overrides(spec, sim_args, *simulate);
      if (simulate->count("--functions")) spec.functions_csv = functions_csv;
      if (simulate->count("--carbon")) spec.carbon_csv = carbon_csv;
      if (simulate->count("--solar")) spec.solar_csv = solar_csv;
      if (simulate->count("--manifest")) spec.locations_json = locations_json;

      faasim::SweepResult result = faasim::run_sweep(spec);
      for (const auto& m : result.runs) {
        std::cout << faasim::to_string(m.policy) << ": executed=" << m.executed
                  << " failed=" << m.failed << " cold=" << m.cold_starts
                  << " emissions=" << m.total_emissions_lbs << " lbs"
                  << " avoided=" << m.emissions_avoided_lbs.value_or(0.0) << " lbs"
                  << " downtime=" << m.downtime_server_s << " s"
                  << " shutdowns=" << m.shutdown_count << "\n";
      }
      std::cout << "wrote " << result.metrics_files.size() << " metrics file(s) and "
                << result.summary_file.string() << "\n";
      return 0;
    }
    if (gen->parsed()) {
      faasim::ExperimentSpec spec;
      if (gen->count("--config")) spec = faasim::load_spec(gen_args.config);
      apply_overrides(spec, gen_args, *gen);
      return faasim::cmd_gen_traces(spec);
    }
    if (report->parsed()) {
      std::vector<std::filesystem::path> dirs(report_dirs.begin(), report_dirs.end());
      return faasim::cmd_report(dirs, report_hourly, report_out);
    }
  } catch (const faasim::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const faasim::TraceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const faasim::SimError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
