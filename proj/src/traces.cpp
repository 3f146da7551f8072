#include "faasim/traces.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "faasim/hash_ring.hpp"
#include "faasim/rng.hpp"
#include "faasim/text.hpp"

namespace faasim {

namespace {

constexpr std::int64_t kSamplePeriodS = 300; // 5-minute cadence
constexpr std::int64_t kDayS = 86400;

[[noreturn]] void fail(const std::filesystem::path& path, std::size_t line,
                       const std::string& what) {
  throw TraceError(path.string() + ":" + std::to_string(line) + ": " + what);
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TraceError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw TraceError("cannot write " + path.string());
  return out;
}

// Sampled step function: value of the last sample at or before t.
template <class Sample>
const Sample* sample_at(const std::vector<Sample>& samples, SimTick t) {
  if (samples.empty()) return nullptr;
  auto it = std::upper_bound(samples.begin(), samples.end(), t,
                             [](SimTick v, const Sample& s) { return v < s.t; });
  if (it == samples.begin()) return &*it; // before the first sample: hold it
  return &*std::prev(it);
}

std::string profile_tag(WorkloadProfile p) {
  switch (p) {
    case WorkloadProfile::Rare: return "rare";
    case WorkloadProfile::Medium: return "med";
    case WorkloadProfile::High: return "high";
  }
  return "fn";
}

} // namespace

ProfileStats profile_stats(WorkloadProfile p) {
  switch (p) {
    case WorkloadProfile::Rare: return {125, 15.0};
    case WorkloadProfile::Medium: return {50, 54.0};
    case WorkloadProfile::High: return {50, 354.0};
  }
  return {};
}

std::string to_string(WorkloadProfile p) {
  switch (p) {
    case WorkloadProfile::Rare: return "rare";
    case WorkloadProfile::Medium: return "medium";
    case WorkloadProfile::High: return "high";
  }
  return "unknown";
}

std::optional<WorkloadProfile> parse_profile(std::string_view name) {
  if (name == "rare") return WorkloadProfile::Rare;
  if (name == "medium") return WorkloadProfile::Medium;
  if (name == "high") return WorkloadProfile::High;
  return std::nullopt;
}

std::int64_t FunctionTrace::total_invocations() const {
  std::int64_t n = 0;
  for (const auto& row : counts)
    for (int c : row) n += c;
  return n;
}

double CarbonTrace::at(SimTick t) const {
  const CarbonSample* s = sample_at(samples, t);
  return s ? s->moer_lbs_per_mwh : 0.0;
}

double CarbonTrace::mean() const {
  if (samples.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : samples) sum += s.moer_lbs_per_mwh;
  return sum / static_cast<double>(samples.size());
}

double SolarTrace::gti_at(SimTick t) const {
  const SolarSample* s = sample_at(samples, t);
  return s ? s->gti_w_per_m2 : 0.0;
}

double SolarTrace::output_w(SimTick t) const {
  // Panel output scales linearly with irradiance; rated at 1000 W/m^2.
  return gti_at(t) / 1000.0 * array_watts;
}

double SolarTrace::mean_gti() const {
  if (samples.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : samples) sum += s.gti_w_per_m2;
  return sum / static_cast<double>(samples.size());
}

double exec_time_for(std::string_view function_id) {
  // The range is keyed on the id prefix so loading a trace from CSV (which
  // carries no execution times) reconstructs the same definitions the
  // generator produced. Midpoints match observed per-class means.
  double lo = 0.1, hi = 2.0;
  if (function_id.starts_with("rare-")) {
    lo = 1.0;
    hi = 7.0;
  } else if (function_id.starts_with("med-")) {
    lo = 0.4;
    hi = 1.8;
  } else if (function_id.starts_with("high-")) {
    lo = 0.05;
    hi = 0.35;
  }
  return lo + (hi - lo) * hash_to_unit(function_id);
}

FunctionTrace gen_function_trace(WorkloadProfile profile, std::int64_t duration_s,
                                 std::uint64_t seed, int num_function_types) {
  ProfileStats stats = profile_stats(profile);
  const int n = stats.num_functions;
  const std::string tag = profile_tag(profile);
  FunctionTrace trace;
  trace.minutes = duration_s / 60;
  trace.functions.reserve(n);
  for (int i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s-%04d", tag.c_str(), i);
    FunctionDef def;
    def.id = buf;
    def.func_type = num_function_types > 0 ? i % num_function_types : 0;
    def.mean_exec_time_s = exec_time_for(def.id);
    trace.functions.push_back(std::move(def));
  }

  // Heavy-tailed rate split: the first fifth of the population carries 80%
  // of the total request rate, with per-function jitter inside each group.
  Rng rng(mix_seed(seed, 0x66756e63ULL));
  const int n_head = std::max(1, static_cast<int>(std::lround(n * 0.2)));
  std::vector<double> share(n, 0.0);
  double head_sum = 0.0, tail_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    share[i] = 0.5 + rng.uniform01();
    (i < n_head ? head_sum : tail_sum) += share[i];
  }
  std::vector<double> rate(n, 0.0);
  for (int i = 0; i < n; ++i) {
    if (i < n_head)
      rate[i] = 0.8 * stats.reqs_per_min * share[i] / head_sum;
    else
      rate[i] = 0.2 * stats.reqs_per_min * share[i] / tail_sum;
  }

  trace.counts.assign(static_cast<std::size_t>(trace.minutes), std::vector<int>(n, 0));
  for (std::int64_t m = 0; m < trace.minutes; ++m) {
    for (int i = 0; i < n; ++i) {
      trace.counts[static_cast<std::size_t>(m)][static_cast<std::size_t>(i)] =
          rng.poisson(rate[static_cast<std::size_t>(i)]);
    }
  }
  return trace;
}

CarbonTrace gen_carbon_trace(std::string location_id, double avg_moer,
                             std::int64_t duration_s, std::uint64_t seed) {
  CarbonTrace trace;
  trace.location_id = std::move(location_id);
  Rng rng(mix_seed(seed, fnv1a64(trace.location_id) ^ 0x636172626fULL));
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  double sum = 0.0;
  for (std::int64_t t = 0; t < duration_s; t += kSamplePeriodS) {
    double diurnal =
        1.0 + 0.25 * std::sin(2.0 * std::numbers::pi *
                                  static_cast<double>(t % kDayS) / kDayS +
                              phase);
    double noise = 1.0 + 0.10 * (2.0 * rng.uniform01() - 1.0);
    double v = avg_moer * diurnal * noise;
    trace.samples.push_back({t, v});
    sum += v;
  }
  // Rescale so the trace mean is the published average exactly.
  if (sum > 0.0 && !trace.samples.empty()) {
    double scale = avg_moer * static_cast<double>(trace.samples.size()) / sum;
    for (auto& s : trace.samples) s.moer_lbs_per_mwh = std::max(0.0, s.moer_lbs_per_mwh * scale);
  }
  return trace;
}

SolarTrace gen_solar_trace(std::string location_id, double avg_gti, double array_watts,
                           std::int64_t duration_s, std::uint64_t seed) {
  SolarTrace trace;
  trace.location_id = std::move(location_id);
  trace.array_watts = array_watts;
  Rng rng(mix_seed(seed, fnv1a64(trace.location_id) ^ 0x736f6c6172ULL));
  // A half-sine from 06:00 to 18:00 whose clear-sky peak is pi * the
  // all-hours mean, attenuated by a per-day cloud factor and brief dips.
  const double peak = std::numbers::pi * avg_gti;
  std::int64_t current_day = -1;
  double day_factor = 1.0;
  double sum = 0.0;
  for (std::int64_t t = 0; t < duration_s; t += kSamplePeriodS) {
    std::int64_t day = t / kDayS;
    if (day != current_day) {
      current_day = day;
      day_factor = 0.65 + 0.35 * rng.uniform01();
    }
    std::int64_t sec = t % kDayS;
    double v = 0.0;
    if (sec >= 6 * 3600 && sec < 18 * 3600) {
      double frac = static_cast<double>(sec - 6 * 3600) / (12.0 * 3600.0);
      v = peak * std::sin(std::numbers::pi * frac) * day_factor;
      // Passing clouds: occasional sharp dips on single samples.
      if (rng.uniform01() < 0.15) v *= 1.0 - 0.25 * rng.uniform01();
    }
    trace.samples.push_back({t, v});
    sum += v;
  }
  if (sum > 0.0 && !trace.samples.empty()) {
    double scale = avg_gti * static_cast<double>(trace.samples.size()) / sum;
    for (auto& s : trace.samples) s.gti_w_per_m2 = std::max(0.0, s.gti_w_per_m2 * scale);
  }
  return trace;
}

const std::vector<LocationSpec>& default_locations() {
  // Real hyperscale data-center sites; grid carbon averages (lbs/MWh) and
  // irradiance averages (W/m^2) from public utility and solar-resource data.
  static const std::vector<LocationSpec> locs = {
      {"henderson-nv", 991.0, 271.0, 1000.0, 3800.0, 2},
      {"the-dalles-or", 1068.0, 201.0, 1000.0, 3800.0, 2},
      {"douglas-county-ga", 1169.0, 203.0, 1000.0, 3800.0, 2},
      {"new-albany-oh", 1283.0, 174.0, 1000.0, 3800.0, 2},
      {"storey-county-nv", 991.0, 265.0, 1000.0, 3800.0, 2},
      {"montgomery-county-tn", 1139.0, 192.0, 1000.0, 3800.0, 2},
      {"papillion-ne", 1108.0, 211.0, 1000.0, 3800.0, 2},
      {"midlothian-tx", 1099.0, 216.0, 1000.0, 3800.0, 2},
      {"mayes-county-ok", 1350.0, 204.0, 1000.0, 3800.0, 2},
  };
  return locs;
}

void save_locations_json(const std::filesystem::path& path,
                         const std::vector<LocationSpec>& locations) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& loc : locations) {
    arr.push_back({{"location_id", loc.location_id},
                   {"avg_moer", loc.avg_moer},
                   {"avg_gti", loc.avg_gti},
                   {"solar_array_w", loc.solar_array_w},
                   {"battery_wh", loc.battery_wh},
                   {"servers", loc.servers}});
  }
  auto out = open_out(path);
  out << arr.dump(2) << "\n";
}

std::vector<LocationSpec> load_locations_json(const std::filesystem::path& path) {
  auto in = open_in(path);
  nlohmann::json arr;
  try {
    in >> arr;
  } catch (const nlohmann::json::exception& e) {
    throw TraceError(path.string() + ": " + e.what());
  }
  if (!arr.is_array()) throw TraceError(path.string() + ": expected a JSON array");
  std::vector<LocationSpec> locs;
  for (const auto& item : arr) {
    try {
      LocationSpec loc;
      loc.location_id = item.at("location_id").get<std::string>();
      loc.avg_moer = item.at("avg_moer").get<double>();
      loc.avg_gti = item.at("avg_gti").get<double>();
      loc.solar_array_w = item.value("solar_array_w", 1000.0);
      loc.battery_wh = item.value("battery_wh", 3800.0);
      loc.servers = item.value("servers", 2);
      if (loc.location_id.empty()) throw TraceError(path.string() + ": empty location_id");
      locs.push_back(std::move(loc));
    } catch (const nlohmann::json::exception& e) {
      throw TraceError(path.string() + ": " + e.what());
    }
  }
  return locs;
}

void save_function_csv(const std::filesystem::path& path, const FunctionTrace& trace) {
  auto out = open_out(path);
  out << "minute_index,function_id,func_type,invocations\n";
  for (std::int64_t m = 0; m < trace.minutes; ++m) {
    const auto& row = trace.counts[static_cast<std::size_t>(m)];
    for (std::size_t i = 0; i < trace.functions.size(); ++i) {
      out << m << ',' << trace.functions[i].id << ',' << trace.functions[i].func_type
          << ',' << row[i] << '\n';
    }
  }
}

FunctionTrace load_function_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw TraceError(path.string() + ": empty file");
  ++lineno;
  if (trim(line) != "minute_index,function_id,func_type,invocations")
    fail(path, lineno, "unexpected header");

  std::map<std::string, std::size_t> index;
  FunctionTrace trace;
  struct Cell {
    std::int64_t minute;
    std::size_t fn;
    int count;
  };
  std::vector<Cell> cells;
  std::int64_t max_minute = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 4) fail(path, lineno, "expected 4 fields");
    std::int64_t minute = 0, ftype = 0, count = 0;
    if (!parse_i64(fields[0], minute) || minute < 0)
      fail(path, lineno, "bad minute_index");
    if (fields[1].empty()) fail(path, lineno, "empty function_id");
    if (!parse_i64(fields[2], ftype) || ftype < 0) fail(path, lineno, "bad func_type");
    if (!parse_i64(fields[3], count) || count < 0) fail(path, lineno, "bad invocations");
    std::string id(fields[1]);
    auto [it, inserted] = index.try_emplace(id, trace.functions.size());
    if (inserted) {
      FunctionDef def;
      def.id = id;
      def.func_type = static_cast<int>(ftype);
      def.mean_exec_time_s = exec_time_for(id);
      trace.functions.push_back(std::move(def));
    } else if (trace.functions[it->second].func_type != static_cast<int>(ftype)) {
      fail(path, lineno, "func_type conflicts with an earlier row for " + id);
    }
    cells.push_back({minute, it->second, static_cast<int>(count)});
    max_minute = std::max(max_minute, minute);
  }
  trace.minutes = max_minute + 1;
  trace.counts.assign(static_cast<std::size_t>(trace.minutes),
                      std::vector<int>(trace.functions.size(), 0));
  for (const auto& c : cells)
    trace.counts[static_cast<std::size_t>(c.minute)][c.fn] += c.count;
  return trace;
}

void save_carbon_csv(const std::filesystem::path& path,
                     const std::vector<CarbonTrace>& traces) {
  auto out = open_out(path);
  out << "timestamp_s,location_id,moer_lbs_per_mwh\n";
  for (const auto& tr : traces) {
    for (const auto& s : tr.samples) {
      out << s.t << ',' << tr.location_id << ',' << fmt_double(s.moer_lbs_per_mwh)
          << '\n';
    }
  }
}

std::vector<CarbonTrace> load_carbon_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw TraceError(path.string() + ": empty file");
  ++lineno;
  if (trim(line) != "timestamp_s,location_id,moer_lbs_per_mwh")
    fail(path, lineno, "unexpected header");
  std::map<std::string, CarbonTrace> by_loc;
  std::vector<std::string> order;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 3) fail(path, lineno, "expected 3 fields");
    std::int64_t t = 0;
    double v = 0.0;
    if (!parse_i64(fields[0], t) || t < 0) fail(path, lineno, "bad timestamp_s");
    if (fields[1].empty()) fail(path, lineno, "empty location_id");
    if (!parse_f64(fields[2], v) || !(v >= 0.0))
      fail(path, lineno, "bad moer_lbs_per_mwh");
    std::string loc(fields[1]);
    auto [it, inserted] = by_loc.try_emplace(loc);
    if (inserted) {
      it->second.location_id = loc;
      order.push_back(loc);
    }
    if (!it->second.samples.empty() && it->second.samples.back().t >= t)
      fail(path, lineno, "timestamps not strictly increasing for " + loc);
    it->second.samples.push_back({t, v});
  }
  std::vector<CarbonTrace> out;
  out.reserve(order.size());
  for (const auto& loc : order) out.push_back(std::move(by_loc[loc]));
  return out;
}

void save_solar_csv(const std::filesystem::path& path,
                    const std::vector<SolarTrace>& traces) {
  auto out = open_out(path);
  out << "timestamp_s,location_id,gti_w_per_m2\n";
  for (const auto& tr : traces) {
    for (const auto& s : tr.samples) {
      out << s.t << ',' << tr.location_id << ',' << fmt_double(s.gti_w_per_m2) << '\n';
    }
  }
}

std::vector<SolarTrace> load_solar_csv(const std::filesystem::path& path,
                                       double default_array_watts) {
  auto in = open_in(path);
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw TraceError(path.string() + ": empty file");
  ++lineno;
  if (trim(line) != "timestamp_s,location_id,gti_w_per_m2")
    fail(path, lineno, "unexpected header");
  std::map<std::string, SolarTrace> by_loc;
  std::vector<std::string> order;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 3) fail(path, lineno, "expected 3 fields");
    std::int64_t t = 0;
    double v = 0.0;
    if (!parse_i64(fields[0], t) || t < 0) fail(path, lineno, "bad timestamp_s");
    if (fields[1].empty()) fail(path, lineno, "empty location_id");
    if (!parse_f64(fields[2], v) || !(v >= 0.0)) fail(path, lineno, "bad gti_w_per_m2");
    std::string loc(fields[1]);
    auto [it, inserted] = by_loc.try_emplace(loc);
    if (inserted) {
      it->second.location_id = loc;
      it->second.array_watts = default_array_watts;
      order.push_back(loc);
    }
    if (!it->second.samples.empty() && it->second.samples.back().t >= t)
      fail(path, lineno, "timestamps not strictly increasing for " + loc);
    it->second.samples.push_back({t, v});
  }
  std::vector<SolarTrace> out;
  out.reserve(order.size());
  for (const auto& loc : order) out.push_back(std::move(by_loc[loc]));
  return out;
}

} // namespace faasim
