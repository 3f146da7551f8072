#include "faasim/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>

#include "faasim/text.hpp"

namespace faasim {

namespace {

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return j;
}

void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& known,
                         const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key()))
      throw ConfigError("unknown " + where + " key: " + it.key());
  }
}

} // namespace

std::string to_string(Mode m) {
  return m == Mode::GridConnected ? "grid" : "isolated";
}

std::optional<Mode> parse_mode(std::string_view name) {
  if (name == "grid") return Mode::GridConnected;
  if (name == "isolated") return Mode::GridIsolated;
  return std::nullopt;
}

ExperimentSpec spec_from_json(const nlohmann::json& j) {
  ExperimentSpec spec;
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  reject_unknown_keys(j, {"mode", "policies", "seed", "days", "profile", "functions_csv",
                          "carbon_csv", "solar_csv", "locations_json", "locations_limit",
                          "servers_per_location", "out_dir", "sim"},
                      "config");
  try {
    if (j.contains("mode")) {
      auto m = parse_mode(j.at("mode").get<std::string>());
      if (!m) throw ConfigError("mode must be \"grid\" or \"isolated\"");
      spec.mode = *m;
    }
    if (j.contains("policies")) {
      spec.policies.clear();
      for (const auto& name : j.at("policies")) {
        auto p = parse_policy(name.get<std::string>());
        if (!p) throw ConfigError("unknown policy: " + name.get<std::string>());
        spec.policies.push_back(*p);
      }
      if (spec.policies.empty()) throw ConfigError("policies must not be empty");
    }
    if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("days")) spec.days = j.at("days").get<int>();
    if (j.contains("profile")) {
      auto p = parse_profile(j.at("profile").get<std::string>());
      if (!p) throw ConfigError("profile must be rare, medium, or high");
      spec.profile = *p;
    }
    if (j.contains("functions_csv"))
      spec.functions_csv = j.at("functions_csv").get<std::string>();
    if (j.contains("carbon_csv")) spec.carbon_csv = j.at("carbon_csv").get<std::string>();
    if (j.contains("solar_csv")) spec.solar_csv = j.at("solar_csv").get<std::string>();
    if (j.contains("locations_json"))
      spec.locations_json = j.at("locations_json").get<std::string>();
    if (j.contains("locations_limit"))
      spec.locations_limit = j.at("locations_limit").get<int>();
    if (j.contains("servers_per_location"))
      spec.servers_per_location = j.at("servers_per_location").get<int>();
    if (j.contains("out_dir")) spec.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("sim")) {
      const auto& s = j.at("sim");
      reject_unknown_keys(
          s,
          {"tick_s", "num_function_types", "containers_per_server", "mem_limit",
           "p_idle_w", "p_peak_w", "mem_per_function", "cold_start_penalty_s",
           "warm_start_penalty_s", "profile_period_s", "profile_delay_s", "max_retries",
           "retry_interval_s", "buffer_fraction", "critical_level_fraction",
           "restart_level_fraction", "max_discharge_rate_w", "retry_on_high_carbon",
           "high_carbon_threshold"},
          "sim");
      SimConfig& c = spec.sim;
      if (s.contains("tick_s")) c.tick_s = s.at("tick_s").get<std::int64_t>();
      if (s.contains("num_function_types"))
        c.num_function_types = s.at("num_function_types").get<int>();
      if (s.contains("containers_per_server"))
        c.containers_per_server = s.at("containers_per_server").get<int>();
      if (s.contains("mem_limit")) c.mem_limit = s.at("mem_limit").get<double>();
      if (s.contains("p_idle_w")) c.p_idle_w = s.at("p_idle_w").get<double>();
      if (s.contains("p_peak_w")) c.p_peak_w = s.at("p_peak_w").get<double>();
      if (s.contains("mem_per_function"))
        c.mem_per_function = s.at("mem_per_function").get<double>();
      if (s.contains("cold_start_penalty_s"))
        c.cold_start_penalty_s = s.at("cold_start_penalty_s").get<double>();
      if (s.contains("warm_start_penalty_s"))
        c.warm_start_penalty_s = s.at("warm_start_penalty_s").get<double>();
      if (s.contains("profile_period_s"))
        c.profile_period_s = s.at("profile_period_s").get<double>();
      if (s.contains("profile_delay_s"))
        c.profile_delay_s = s.at("profile_delay_s").get<double>();
      if (s.contains("max_retries")) c.max_retries = s.at("max_retries").get<int>();
      if (s.contains("retry_interval_s"))
        c.retry_interval_s = s.at("retry_interval_s").get<double>();
      if (s.contains("buffer_fraction"))
        c.buffer_fraction = s.at("buffer_fraction").get<double>();
      if (s.contains("critical_level_fraction"))
        c.critical_level_fraction = s.at("critical_level_fraction").get<double>();
      if (s.contains("restart_level_fraction"))
        c.restart_level_fraction = s.at("restart_level_fraction").get<double>();
      if (s.contains("max_discharge_rate_w"))
        c.max_discharge_rate_w = s.at("max_discharge_rate_w").get<double>();
      if (s.contains("retry_on_high_carbon"))
        c.retry_on_high_carbon = s.at("retry_on_high_carbon").get<bool>();
      if (s.contains("high_carbon_threshold"))
        c.high_carbon_threshold = s.at("high_carbon_threshold").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (spec.days <= 0) throw ConfigError("days must be positive");
  return spec;
}

ExperimentSpec load_spec(const std::filesystem::path& config_path) {
  return spec_from_json(read_json_file(config_path));
}

std::int64_t duration_s_of(const ExperimentSpec& spec) {
  return static_cast<std::int64_t>(spec.days) * 86400;
}

std::vector<LocationSpec> resolve_locations(const ExperimentSpec& spec) {
  std::vector<LocationSpec> locs = spec.locations_json.empty()
                                       ? default_locations()
                                       : load_locations_json(spec.locations_json);
  if (spec.locations_limit > 0 &&
      static_cast<std::size_t>(spec.locations_limit) < locs.size())
    locs.resize(static_cast<std::size_t>(spec.locations_limit));
  if (spec.servers_per_location > 0)
    for (auto& l : locs) l.servers = spec.servers_per_location;
  if (locs.empty()) throw ConfigError("no locations configured");
  return locs;
}

SimInputs build_inputs(const ExperimentSpec& spec) {
  SimInputs inputs;
  inputs.locations = resolve_locations(spec);
  const std::int64_t duration = duration_s_of(spec);

  if (spec.functions_csv.empty()) {
    inputs.functions = gen_function_trace(spec.profile, duration, spec.seed,
                                          spec.sim.num_function_types);
  } else {
    inputs.functions = load_function_csv(spec.functions_csv);
  }

  if (spec.carbon_csv.empty()) {
    for (const auto& loc : inputs.locations)
      inputs.carbon.push_back(
          gen_carbon_trace(loc.location_id, loc.avg_moer, duration, spec.seed));
  } else {
    inputs.carbon = load_carbon_csv(spec.carbon_csv);
  }

  if (spec.solar_csv.empty()) {
    for (const auto& loc : inputs.locations)
      inputs.solar.push_back(gen_solar_trace(loc.location_id, loc.avg_gti,
                                             loc.solar_array_w, duration, spec.seed));
  } else {
    inputs.solar = load_solar_csv(spec.solar_csv);
    for (auto& tr : inputs.solar) {
      for (const auto& loc : inputs.locations)
        if (loc.location_id == tr.location_id) tr.array_watts = loc.solar_array_w;
    }
  }
  return inputs;
}

SweepResult run_sweep(const ExperimentSpec& spec) {
  SimInputs inputs = build_inputs(spec);

  SimConfig base = spec.sim;
  base.mode = spec.mode;
  base.seed = spec.seed;
  base.duration_s = duration_s_of(spec);
  base.servers = make_fleet(inputs.locations, base);

  SweepResult result;
  for (Policy p : spec.policies) {
    SimConfig cfg = base;
    cfg.policy = p;
    std::filesystem::path dir = spec.out_dir / to_string(p);
    std::filesystem::create_directories(dir);
    CsvEventSink sink(dir / "events.csv");
    result.runs.push_back(run_simulation(cfg, inputs, &sink));
  }

  // The avoided-emissions column compares against the redirect baseline on
  // the very same inputs; reuse the sweep's run when it is in the lineup.
  auto it = std::find(spec.policies.begin(), spec.policies.end(),
                      Policy::OpenWhiskBaseline);
  if (it != spec.policies.end()) {
    result.baseline = result.runs[static_cast<std::size_t>(it - spec.policies.begin())];
  } else {
    SimConfig cfg = base;
    cfg.policy = Policy::OpenWhiskBaseline;
    result.baseline = run_simulation(cfg, inputs, nullptr);
  }
  for (auto& r : result.runs)
    r.emissions_avoided_lbs = result.baseline.total_emissions_lbs - r.total_emissions_lbs;

  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    std::filesystem::path file =
        spec.out_dir / to_string(spec.policies[i]) / "metrics.json";
    write_metrics_json(file, result.runs[i]);
    result.metrics_files.push_back(file);
  }
  result.summary_file = spec.out_dir / "summary.csv";
  write_summary_csv(result.summary_file, result.runs);
  return result;
}

nlohmann::json metrics_to_json(const RunMetrics& m) {
  nlohmann::json j;
  j["policy"] = to_string(m.policy);
  j["mode"] = to_string(m.mode);
  j["seed"] = m.seed;
  j["duration_s"] = m.duration_s;
  j["arrivals"] = m.arrivals;
  j["executed"] = m.executed;
  j["failed"] = m.failed;
  j["still_queued"] = m.still_queued;
  j["in_flight"] = m.in_flight;
  j["cold_starts"] = m.cold_starts;
  j["warm_starts"] = m.warm_starts;
  j["retries"] = m.retries;
  j["total_energy_wh"] = m.total_energy_wh;
  j["total_emissions_lbs"] = m.total_emissions_lbs;
  if (m.emissions_avoided_lbs)
    j["emissions_avoided_lbs"] = *m.emissions_avoided_lbs;
  else
    j["emissions_avoided_lbs"] = nullptr;
  j["hourly_emissions_lbs"] = m.hourly_emissions_lbs;
  j["downtime_server_s"] = m.downtime_server_s;
  j["shutdown_count"] = m.shutdown_count;
  j["critical_battery_events"] = m.critical_battery_events;
  j["conservation_violations"] = m.conservation_violations;
  j["latency"] = {{"mean_s", m.latency.mean_s},
                  {"p50_s", m.latency.p50_s},
                  {"p95_s", m.latency.p95_s},
                  {"p99_s", m.latency.p99_s}};
  return j;
}

RunMetrics metrics_from_json(const nlohmann::json& j) {
  RunMetrics m;
  try {
    auto p = parse_policy(j.at("policy").get<std::string>());
    auto mode = parse_mode(j.at("mode").get<std::string>());
    if (!p || !mode) throw ConfigError("metrics: bad policy or mode");
    m.policy = *p;
    m.mode = *mode;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.duration_s = j.at("duration_s").get<std::int64_t>();
    m.arrivals = j.at("arrivals").get<std::int64_t>();
    m.executed = j.at("executed").get<std::int64_t>();
    m.failed = j.at("failed").get<std::int64_t>();
    m.still_queued = j.at("still_queued").get<std::int64_t>();
    m.in_flight = j.at("in_flight").get<std::int64_t>();
    m.cold_starts = j.at("cold_starts").get<std::int64_t>();
    m.warm_starts = j.at("warm_starts").get<std::int64_t>();
    m.retries = j.at("retries").get<std::int64_t>();
    m.total_energy_wh = j.at("total_energy_wh").get<double>();
    m.total_emissions_lbs = j.at("total_emissions_lbs").get<double>();
    if (!j.at("emissions_avoided_lbs").is_null())
      m.emissions_avoided_lbs = j.at("emissions_avoided_lbs").get<double>();
    m.hourly_emissions_lbs = j.at("hourly_emissions_lbs").get<std::vector<double>>();
    m.downtime_server_s = j.at("downtime_server_s").get<double>();
    m.shutdown_count = j.at("shutdown_count").get<std::int64_t>();
    m.critical_battery_events = j.at("critical_battery_events").get<std::int64_t>();
    m.conservation_violations = j.at("conservation_violations").get<std::int64_t>();
    m.latency.mean_s = j.at("latency").at("mean_s").get<double>();
    m.latency.p50_s = j.at("latency").at("p50_s").get<double>();
    m.latency.p95_s = j.at("latency").at("p95_s").get<double>();
    m.latency.p99_s = j.at("latency").at("p99_s").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("metrics: ") + e.what());
  }
  return m;
}

void write_metrics_json(const std::filesystem::path& path, const RunMetrics& m) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << metrics_to_json(m).dump(2) << "\n";
}

RunMetrics load_metrics_json(const std::filesystem::path& path) {
  return metrics_from_json(read_json_file(path));
}

void write_summary_csv(const std::filesystem::path& path,
                       const std::vector<RunMetrics>& runs) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "policy,mode,seed,duration_s,arrivals,executed,failed,still_queued,in_flight,"
         "cold_starts,warm_starts,retries,total_energy_wh,total_emissions_lbs,"
         "emissions_avoided_lbs,downtime_server_s,shutdown_count,"
         "critical_battery_events,latency_mean_s,latency_p50_s,latency_p95_s,"
         "latency_p99_s\n";
  for (const auto& m : runs) {
    out << to_string(m.policy) << ',' << to_string(m.mode) << ',' << m.seed << ','
        << m.duration_s << ',' << m.arrivals << ',' << m.executed << ',' << m.failed
        << ',' << m.still_queued << ',' << m.in_flight << ',' << m.cold_starts << ','
        << m.warm_starts << ',' << m.retries << ',' << fmt_double(m.total_energy_wh)
        << ',' << fmt_double(m.total_emissions_lbs) << ','
        << (m.emissions_avoided_lbs ? fmt_double(*m.emissions_avoided_lbs)
                                    : std::string())
        << ',' << fmt_double(m.downtime_server_s) << ',' << m.shutdown_count << ','
        << m.critical_battery_events << ',' << fmt_double(m.latency.mean_s) << ','
        << fmt_double(m.latency.p50_s) << ',' << fmt_double(m.latency.p95_s) << ','
        << fmt_double(m.latency.p99_s) << '\n';
  }
}

int cmd_gen_traces(const ExperimentSpec& spec) {
  std::vector<LocationSpec> locs = resolve_locations(spec);
  const std::int64_t duration = duration_s_of(spec);
  FunctionTrace fns = gen_function_trace(spec.profile, duration, spec.seed,
                                         spec.sim.num_function_types);
  std::vector<CarbonTrace> carbon;
  std::vector<SolarTrace> solar;
  for (const auto& loc : locs) {
    carbon.push_back(gen_carbon_trace(loc.location_id, loc.avg_moer, duration, spec.seed));
    solar.push_back(
        gen_solar_trace(loc.location_id, loc.avg_gti, loc.solar_array_w, duration, spec.seed));
  }
  std::filesystem::create_directories(spec.out_dir);
  save_function_csv(spec.out_dir / "functions.csv", fns);
  save_carbon_csv(spec.out_dir / "carbon.csv", carbon);
  save_solar_csv(spec.out_dir / "solar.csv", solar);
  save_locations_json(spec.out_dir / "locations.json", locs);
  std::cout << "wrote " << to_string(spec.profile) << " traces for " << spec.days
            << " day(s), " << locs.size() << " location(s) to " << spec.out_dir.string()
            << "\n"
            << "  functions: " << fns.functions.size() << " ids, "
            << fns.total_invocations() << " invocations ("
            << fmt_double(static_cast<double>(fns.total_invocations()) /
                          static_cast<double>(std::max<std::int64_t>(fns.minutes, 1)))
            << " req/min)\n";
  return 0;
}

int cmd_report(const std::vector<std::filesystem::path>& dirs, bool hourly,
               const std::filesystem::path& out_dir) {
  struct Row {
    std::filesystem::path dir;
    RunMetrics m;
  };
  std::vector<Row> rows;
  for (const auto& dir : dirs) {
    if (!std::filesystem::is_directory(dir))
      throw ConfigError(dir.string() + " is not a directory");
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().filename() == "metrics.json")
        files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) rows.push_back({f.parent_path(), load_metrics_json(f)});
  }
  if (rows.empty()) throw ConfigError("no metrics.json found under the given directories");

  std::cout << "policy           mode      executed    failed  cold      warm      "
               "emissions_lbs  avoided_lbs  downtime_s  shutdowns  mean_lat_s\n";
  for (const auto& r : rows) {
    const RunMetrics& m = r.m;
    char line[256];
    std::snprintf(line, sizeof(line),
                  "%-16s %-8s %9lld %9lld %9lld %9lld %14.6f %12.6f %11.0f %10lld %11.4f",
                  to_string(m.policy).c_str(), to_string(m.mode).c_str(),
                  static_cast<long long>(m.executed), static_cast<long long>(m.failed),
                  static_cast<long long>(m.cold_starts),
                  static_cast<long long>(m.warm_starts), m.total_emissions_lbs,
                  m.emissions_avoided_lbs.value_or(0.0), m.downtime_server_s,
                  static_cast<long long>(m.shutdown_count), m.latency.mean_s);
    std::cout << line << "\n";
  }

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::vector<RunMetrics> ms;
    for (const auto& r : rows) ms.push_back(r.m);
    write_summary_csv(out_dir / "report.csv", ms);
  }
  if (hourly) {
    std::ostream* os = &std::cout;
    std::ofstream file;
    if (!out_dir.empty()) {
      file.open(out_dir / "hourly.csv");
      if (!file) throw ConfigError("cannot write " + (out_dir / "hourly.csv").string());
      os = &file;
    }
    *os << "policy,hour,emissions_lbs\n";
    for (const auto& r : rows) {
      for (std::size_t h = 0; h < r.m.hourly_emissions_lbs.size(); ++h) {
        *os << to_string(r.m.policy) << ',' << h << ','
            << fmt_double(r.m.hourly_emissions_lbs[h]) << '\n';
      }
    }
  }
  return 0;
}

} // namespace faasim
