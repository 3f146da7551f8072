#include "faasim/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "faasim/hash_ring.hpp"
#include "faasim/rng.hpp"
#include "faasim/text.hpp"

namespace faasim {

// ---- event sinks ---------------------------------------------------------

CsvEventSink::CsvEventSink(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path);
  if (!out_) throw SimError("cannot write " + path.string());
  out_ << "record,t,location_id,server_id,function_id,func_type,outcome,start_kind,"
          "retry_count,arrival,busy_ticks,latency_s,energy_wh,emissions_lbs,battery_wh\n";
}

void CsvEventSink::on_invocation(const InvocationEvent& e) {
  out_ << "invocation," << e.t << ',' << e.location_id << ',' << e.server_id << ','
       << e.function_id << ',' << e.func_type << ','
       << (e.executed ? "executed" : "failed") << ',' << e.start_kind << ','
       << e.retry_count << ',' << e.arrival << ',' << e.busy_ticks << ','
       << (e.executed ? fmt_double(e.latency_s) : std::string()) << ",,,\n";
}

void CsvEventSink::on_server_hour(const ServerHourEvent& e) {
  out_ << "server_hour," << e.hour_start << ',' << e.location_id << ',' << e.server_id
       << ",,,,,,,,," << fmt_double(e.energy_wh) << ',' << fmt_double(e.emissions_lbs)
       << ",\n";
}

void CsvEventSink::on_power(const PowerEvent& e) {
  out_ << "power," << e.t << ',' << e.location_id << ",,,,"
       << (e.up ? "restart" : "shutdown") << ",,,,,,,," << fmt_double(e.battery_wh)
       << '\n';
}

// ---- placement and timing helpers ----------------------------------------

namespace {

// Lowest-index free slot, preferring one that already holds the image type.
int find_slot(const ServerState& s, int func_type, PlaceResult& kind) {
  int free_idx = -1;
  for (std::size_t i = 0; i < s.containers.size(); ++i) {
    const ContainerSlot& c = s.containers[i];
    if (c.busy_until) continue;
    if (c.current_type && *c.current_type == func_type) {
      kind = PlaceResult::WarmStart;
      return static_cast<int>(i);
    }
    if (free_idx < 0) free_idx = static_cast<int>(i);
  }
  if (free_idx >= 0) {
    kind = PlaceResult::ColdStart;
    return free_idx;
  }
  kind = PlaceResult::NoCapacity;
  return -1;
}

} // namespace

namespace {

// place_in_container plus the chosen slot index, for callers that track
// per-slot bookkeeping.
PlaceResult place_in_slot(ServerState& s, int func_type, SimTick now,
                          SimTick busy_for_ticks, int& slot_out) {
  PlaceResult kind = PlaceResult::NoCapacity;
  slot_out = find_slot(s, func_type, kind);
  if (slot_out < 0) return kind;
  ContainerSlot& c = s.containers[static_cast<std::size_t>(slot_out)];
  c.current_type = func_type;
  c.busy_until = now + std::max<SimTick>(busy_for_ticks, 1);
  return kind;
}

} // namespace

PlaceResult peek_place(const ServerState& s, int func_type) {
  PlaceResult kind = PlaceResult::NoCapacity;
  (void)find_slot(s, func_type, kind);
  return kind;
}

PlaceResult place_in_container(ServerState& s, int func_type, SimTick now,
                               SimTick busy_for_ticks) {
  int slot = -1;
  return place_in_slot(s, func_type, now, busy_for_ticks, slot);
}

std::vector<SimTick> spread_arrivals(int count, std::int64_t minute_index) {
  std::vector<SimTick> out;
  if (count <= 0) return out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    out.push_back(minute_index * 60 +
                  static_cast<SimTick>(static_cast<std::int64_t>(k) * 60 / count));
  }
  return out;
}

double latency_of(double queue_delay_s, bool cold_start, double cold_penalty_s,
                  double warm_penalty_s, double exec_s) {
  return queue_delay_s + (cold_start ? cold_penalty_s : warm_penalty_s) + exec_s;
}

std::vector<ServerState> make_fleet(const std::vector<LocationSpec>& locations,
                                    const SimConfig& cfg) {
  std::vector<ServerState> fleet;
  for (const auto& loc : locations) {
    for (int i = 0; i < loc.servers; ++i) {
      ServerState s;
      char buf[16];
      std::snprintf(buf, sizeof(buf), "-s%02d", i);
      s.id = loc.location_id + buf;
      s.location_id = loc.location_id;
      s.ring_position = hash_to_unit(s.id);
      s.mem_limit = cfg.mem_limit;
      s.containers.assign(static_cast<std::size_t>(std::max(cfg.containers_per_server, 1)),
                          ContainerSlot{});
      s.p_idle_w = cfg.p_idle_w;
      s.p_peak_w = cfg.p_peak_w;
      fleet.push_back(std::move(s));
    }
  }
  return fleet;
}

// ---- the run loop ---------------------------------------------------------

namespace {

struct ActiveInvocation {
  InvocationRequest request;
  SimTick assigned = 0;
  SimTick busy_until = 0;
  bool cold = false;
  double latency_s = 0.0;
};

struct LocationRuntime {
  LocationSpec spec;
  EnergyState energy;
  const CarbonTrace* carbon = nullptr;
  const SolarTrace* solar = nullptr;
  std::vector<std::size_t> server_idx;
  bool offline = false;
};

double percentile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0.0;
  auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::ptrdiff_t>(std::ceil(p / 100.0 * n)) - 1;
  rank = std::clamp<std::ptrdiff_t>(rank, 0, static_cast<std::ptrdiff_t>(sorted.size()) - 1);
  return sorted[static_cast<std::size_t>(rank)];
}

void validate(const SimConfig& cfg, const SimInputs& inputs,
              const std::map<std::string, std::size_t>& loc_index) {
  if (cfg.tick_s <= 0) throw SimError("tick_s must be positive");
  if (cfg.duration_s < 0 || cfg.duration_s % cfg.tick_s != 0)
    throw SimError("duration_s must be a non-negative multiple of tick_s");
  if (cfg.servers.empty()) throw SimError("no servers configured");
  if (cfg.num_function_types <= 0) throw SimError("num_function_types must be positive");
  if (!(cfg.mem_per_function > 0.0)) throw SimError("mem_per_function must be positive");
  if (cfg.max_retries < 0) throw SimError("max_retries must be non-negative");
  if (!(cfg.retry_interval_s > 0.0)) throw SimError("retry_interval_s must be positive");
  for (const auto& s : cfg.servers) {
    auto errors = validate_server(s);
    if (!errors.empty()) throw SimError("server " + s.id + ": " + errors.front());
    if (!loc_index.count(s.location_id))
      throw SimError("server " + s.id + " references unknown location " + s.location_id);
  }
  {
    std::set<std::string> ids;
    for (const auto& s : cfg.servers)
      if (!ids.insert(s.id).second) throw SimError("duplicate server id " + s.id);
  }
  for (const auto& f : inputs.functions.functions) {
    if (f.func_type < 0 || f.func_type >= cfg.num_function_types)
      throw SimError("function " + f.id + " has func_type outside [0, num_function_types)");
    if (!(f.mean_exec_time_s > 0.0))
      throw SimError("function " + f.id + " has non-positive mean_exec_time_s");
  }
}

} // namespace

RunMetrics run_simulation(const SimConfig& cfg, const SimInputs& inputs,
                          EventSink* sink) {
  CollectSink devnull_sink;
  EventSink& events = sink ? *sink : static_cast<EventSink&>(devnull_sink);

  std::map<std::string, std::size_t> loc_index;
  for (std::size_t i = 0; i < inputs.locations.size(); ++i)
    loc_index[inputs.locations[i].location_id] = i;
  validate(cfg, inputs, loc_index);

  // Bind per-location runtime state.
  std::vector<LocationRuntime> locs(inputs.locations.size());
  for (std::size_t i = 0; i < inputs.locations.size(); ++i) {
    LocationRuntime& lr = locs[i];
    lr.spec = inputs.locations[i];
    lr.energy.location_id = lr.spec.location_id;
    lr.energy.battery_capacity_wh = lr.spec.battery_wh;
    lr.energy.battery_level_wh = lr.spec.battery_wh; // start charged
    lr.energy.max_discharge_rate_w = cfg.max_discharge_rate_w;
    lr.energy.buffer_fraction = cfg.buffer_fraction;
    for (const auto& tr : inputs.carbon)
      if (tr.location_id == lr.spec.location_id) lr.carbon = &tr;
    for (const auto& tr : inputs.solar)
      if (tr.location_id == lr.spec.location_id) lr.solar = &tr;
    if (cfg.mode == Mode::GridConnected && !lr.carbon)
      throw SimError("no carbon trace for location " + lr.spec.location_id);
    if (cfg.mode == Mode::GridIsolated && !lr.solar)
      throw SimError("no solar trace for location " + lr.spec.location_id);
    lr.energy.solar_output_w = lr.solar ? lr.solar->output_w(0) : 0.0;
  }

  std::vector<ServerState> servers = cfg.servers;
  for (auto& lr : locs) lr.server_idx.clear();
  for (std::size_t i = 0; i < servers.size(); ++i)
    locs[loc_index.at(servers[i].location_id)].server_idx.push_back(i);

  // Pre-expand the workload into (tick, function) arrivals, in trace order.
  std::vector<std::pair<SimTick, std::size_t>> arrivals;
  const std::int64_t sim_minutes =
      std::min<std::int64_t>(inputs.functions.minutes, (cfg.duration_s + 59) / 60);
  for (std::int64_t m = 0; m < sim_minutes; ++m) {
    const auto& row = inputs.functions.counts[static_cast<std::size_t>(m)];
    for (std::size_t f = 0; f < row.size(); ++f) {
      for (SimTick sec : spread_arrivals(row[f], m)) {
        if (sec < cfg.duration_s) arrivals.emplace_back(sec / cfg.tick_s, f);
      }
    }
  }
  std::stable_sort(arrivals.begin(), arrivals.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  Rng rng(mix_seed(cfg.seed, 0x72756e00ULL));
  // The queue works in ticks, so convert the backoff interval.
  RetryQueue retry(cfg.retry_interval_s / static_cast<double>(cfg.tick_s));
  ProfileChannel channel;
  BalancerConfig bcfg;
  bcfg.mem_per_function = cfg.mem_per_function;
  bcfg.max_retries = cfg.max_retries;
  bcfg.retry_interval_s = cfg.retry_interval_s;
  bcfg.retry_on_high_carbon = cfg.retry_on_high_carbon;
  bcfg.high_carbon_threshold = cfg.high_carbon_threshold;

  RunMetrics m;
  m.policy = cfg.policy;
  m.mode = cfg.mode;
  m.seed = cfg.seed;
  m.duration_s = cfg.duration_s;
  const std::int64_t ticks_per_hour = std::max<std::int64_t>(3600 / cfg.tick_s, 1);
  const std::int64_t n_hours = (cfg.duration_s / cfg.tick_s + ticks_per_hour - 1) / ticks_per_hour;
  m.hourly_emissions_lbs.assign(static_cast<std::size_t>(std::max<std::int64_t>(n_hours, 0)), 0.0);

  // Per-server in-flight work, indexed by container slot.
  std::vector<std::vector<std::optional<ActiveInvocation>>> active(servers.size());
  for (std::size_t i = 0; i < servers.size(); ++i)
    active[i].assign(servers[i].containers.size(), std::nullopt);

  std::vector<double> latencies;
  std::vector<double> hour_energy_wh(servers.size(), 0.0);
  std::vector<double> hour_emissions(servers.size(), 0.0);
  SimTick hour_start_tick = 0;

  const SimTick delay_ticks =
      static_cast<SimTick>(std::llround(cfg.profile_delay_s / static_cast<double>(cfg.tick_s)));
  const SimTick period_ticks = std::max<SimTick>(
      static_cast<SimTick>(std::llround(cfg.profile_period_s / static_cast<double>(cfg.tick_s))), 1);

  auto flush_hour = [&](SimTick boundary) {
    for (std::size_t i = 0; i < servers.size(); ++i) {
      ServerHourEvent e;
      e.hour_start = hour_start_tick * cfg.tick_s;
      e.location_id = servers[i].location_id;
      e.server_id = servers[i].id;
      e.energy_wh = hour_energy_wh[i];
      e.emissions_lbs = hour_emissions[i];
      events.on_server_hour(e);
      hour_energy_wh[i] = 0.0;
      hour_emissions[i] = 0.0;
    }
    hour_start_tick = boundary;
  };

  auto submit = [&](InvocationRequest req, SimTick t) {
    Selection sel = select_server(cfg.policy, servers, req, cfg.mode, channel.visible(),
                                  bcfg, rng);
    switch (sel.kind) {
      case Selection::Kind::Assigned: {
        // sel.server points into `servers`; recover the index to mutate it.
        auto sidx = static_cast<std::size_t>(sel.server - servers.data());
        ServerState& srv = servers[sidx];
        // Start kind decides the penalty, which decides how long the slot
        // stays busy, so probe first and place after.
        PlaceResult kind = peek_place(srv, req.function.func_type);
        if (kind == PlaceResult::NoCapacity) {
          // Memory admitted the request but every slot is busy.
          if (req.retry_count >= cfg.max_retries) {
            ++m.failed;
            InvocationEvent e;
            e.t = t * cfg.tick_s;
            e.function_id = req.function.id;
            e.func_type = req.function.func_type;
            e.retry_count = req.retry_count;
            e.arrival = req.arrival * cfg.tick_s;
            events.on_invocation(e);
          } else {
            retry.push(std::move(req), t);
            ++m.retries;
          }
          return;
        }
        bool cold = kind == PlaceResult::ColdStart;
        double penalty = cold ? cfg.cold_start_penalty_s : cfg.warm_start_penalty_s;
        double exec = req.function.mean_exec_time_s;
        auto busy_ticks = std::max<SimTick>(
            static_cast<SimTick>(
                std::ceil((penalty + exec) / static_cast<double>(cfg.tick_s))),
            1);
        int slot = -1;
        place_in_slot(srv, req.function.func_type, t, busy_ticks, slot);
        srv.mem_used += cfg.mem_per_function;
        double queue_delay_s =
            static_cast<double>(t - req.arrival) * static_cast<double>(cfg.tick_s);
        ActiveInvocation inv;
        inv.request = std::move(req);
        inv.assigned = t;
        inv.busy_until = t + busy_ticks;
        inv.cold = cold;
        inv.latency_s = latency_of(queue_delay_s, cold, cfg.cold_start_penalty_s,
                                   cfg.warm_start_penalty_s, exec);
        active[sidx][static_cast<std::size_t>(slot)] = std::move(inv);
        return;
      }
      case Selection::Kind::Enqueued:
        retry.push(std::move(req), t);
        ++m.retries;
        return;
      case Selection::Kind::Failed: {
        ++m.failed;
        InvocationEvent e;
        e.t = t * cfg.tick_s;
        e.function_id = req.function.id;
        e.func_type = req.function.func_type;
        e.retry_count = req.retry_count;
        e.arrival = req.arrival * cfg.tick_s;
        events.on_invocation(e);
        return;
      }
    }
  };

  const SimTick total_ticks = cfg.duration_s / cfg.tick_s;
  std::size_t arrival_cursor = 0;

  for (SimTick t = 0; t < total_ticks; ++t) {
    if (t / ticks_per_hour != hour_start_tick / ticks_per_hour) {
      flush_hour((t / ticks_per_hour) * ticks_per_hour);
    }

    // 1. Completions: free containers whose work finished by this tick.
    for (std::size_t i = 0; i < servers.size(); ++i) {
      for (std::size_t c = 0; c < servers[i].containers.size(); ++c) {
        ContainerSlot& slot = servers[i].containers[c];
        if (!slot.busy_until || *slot.busy_until > t) continue;
        if (!active[i][c]) throw SimError("internal: busy slot without active work");
        ActiveInvocation inv = std::move(*active[i][c]);
        active[i][c].reset();
        slot.busy_until.reset(); // keeps current_type: the image stays warm
        servers[i].mem_used -= cfg.mem_per_function;
        ++m.executed;
        if (inv.cold)
          ++m.cold_starts;
        else
          ++m.warm_starts;
        latencies.push_back(inv.latency_s);
        InvocationEvent e;
        e.t = t * cfg.tick_s;
        e.location_id = servers[i].location_id;
        e.server_id = servers[i].id;
        e.function_id = inv.request.function.id;
        e.func_type = inv.request.function.func_type;
        e.executed = true;
        e.start_kind = inv.cold ? "cold" : "warm";
        e.retry_count = inv.request.retry_count;
        e.arrival = inv.request.arrival * cfg.tick_s;
        e.busy_ticks = inv.busy_until - inv.assigned;
        e.latency_s = inv.latency_s;
        events.on_invocation(e);
      }
    }

    // 2. Site self-reports published this tick become visible after the
    //    transit delay; then deliver whatever is due now.
    if (t % period_ticks == 0) {
      for (const auto& lr : locs) {
        EnergyProfileMsg msg;
        msg.location_id = lr.spec.location_id;
        msg.timestamp = t * cfg.tick_s;
        msg.carbon_intensity = lr.carbon ? lr.carbon->at(t * cfg.tick_s) : 0.0;
        msg.battery_level_wh = lr.energy.battery_level_wh;
        msg.battery_capacity_wh = lr.energy.battery_capacity_wh;
        msg.max_discharge_rate_w = lr.energy.max_discharge_rate_w;
        msg.buffer_fraction = lr.energy.buffer_fraction;
        msg.solar_output_w = lr.solar ? lr.solar->output_w(t * cfg.tick_s) : 0.0;
        channel.publish(std::move(msg), t + delay_ticks);
      }
    }
    channel.advance(t);

    // 3. Requests whose retry backoff expired go first (oldest first)...
    for (auto& req : retry.drain_due(t)) submit(std::move(req), t);

    // 4. ...then this tick's fresh arrivals.
    while (arrival_cursor < arrivals.size() && arrivals[arrival_cursor].first == t) {
      const auto& [tick, fidx] = arrivals[arrival_cursor++];
      InvocationRequest req;
      req.function = inputs.functions.functions[fidx];
      req.arrival = tick;
      ++m.arrivals;
      submit(std::move(req), t);
    }

    // 5. Energy accounting for the tick everybody just committed to.
    for (auto& lr : locs) {
      if (lr.offline) m.downtime_server_s += static_cast<double>(
          lr.server_idx.size() * static_cast<std::size_t>(cfg.tick_s));

      if (cfg.mode == Mode::GridIsolated) {
        double site_load_w = 0.0;
        for (std::size_t si : lr.server_idx) {
          double p = power_draw(servers[si], servers[si].load(t));
          site_load_w += p;
          double e_wh = p * static_cast<double>(cfg.tick_s) / 3600.0;
          hour_energy_wh[si] += e_wh;
          m.total_energy_wh += e_wh;
        }
        double solar_w = lr.solar->output_w(t * cfg.tick_s);
        double before = lr.energy.battery_level_wh;
        BatteryStep step = battery_step(lr.energy, solar_w, site_load_w,
                                        static_cast<double>(cfg.tick_s));
        double delta = step.state.battery_level_wh - before;
        if (std::abs(delta - (step.charged_wh - step.discharged_wh)) > 1e-9)
          ++m.conservation_violations;
        double critical = cfg.critical_level_fraction * lr.energy.battery_capacity_wh;
        if (before >= critical && step.state.battery_level_wh < critical)
          ++m.critical_battery_events;
        lr.energy = step.state;

        if (step.shutdown && !lr.offline) {
          lr.offline = true;
          m.shutdown_count += static_cast<std::int64_t>(lr.server_idx.size());
          for (std::size_t si : lr.server_idx) {
            ServerState& srv = servers[si];
            srv.online = false;
            for (std::size_t c = 0; c < srv.containers.size(); ++c) {
              if (active[si][c]) {
                // Power loss kills in-flight work; it does not come back.
                ActiveInvocation inv = std::move(*active[si][c]);
                active[si][c].reset();
                ++m.failed;
                InvocationEvent e;
                e.t = t * cfg.tick_s;
                e.location_id = srv.location_id;
                e.server_id = srv.id;
                e.function_id = inv.request.function.id;
                e.func_type = inv.request.function.func_type;
                e.retry_count = inv.request.retry_count;
                e.arrival = inv.request.arrival * cfg.tick_s;
                events.on_invocation(e);
              }
              srv.containers[c] = ContainerSlot{}; // images lost: restarts are cold
            }
            srv.mem_used = 0.0;
          }
          PowerEvent e;
          e.t = t * cfg.tick_s;
          e.location_id = lr.spec.location_id;
          e.up = false;
          e.battery_wh = lr.energy.battery_level_wh;
          events.on_power(e);
        } else if (lr.offline &&
                   lr.energy.battery_level_wh >=
                       cfg.restart_level_fraction * lr.energy.battery_capacity_wh) {
          lr.offline = false;
          for (std::size_t si : lr.server_idx) servers[si].online = true;
          PowerEvent e;
          e.t = t * cfg.tick_s;
          e.location_id = lr.spec.location_id;
          e.up = true;
          e.battery_wh = lr.energy.battery_level_wh;
          events.on_power(e);
        }
      } else {
        // Grid-connected: unconstrained power, carbon accounting only.
        double moer = lr.carbon->at(t * cfg.tick_s);
        for (std::size_t si : lr.server_idx) {
          double p = power_draw(servers[si], servers[si].load(t));
          double e_wh = p * static_cast<double>(cfg.tick_s) / 3600.0;
          double em = scaled_emissions_lbs(e_wh, moer);
          hour_energy_wh[si] += e_wh;
          hour_emissions[si] += em;
          m.total_energy_wh += e_wh;
          m.total_emissions_lbs += em;
          auto hour = static_cast<std::size_t>(t / ticks_per_hour);
          if (hour < m.hourly_emissions_lbs.size()) m.hourly_emissions_lbs[hour] += em;
        }
      }
    }
  }

  if (total_ticks > 0) flush_hour(total_ticks);

  m.still_queued = static_cast<std::int64_t>(retry.size());
  for (const auto& per_server : active)
    for (const auto& slot : per_server)
      if (slot) ++m.in_flight;

  if (!latencies.empty()) {
    std::vector<double> sorted = latencies;
    std::sort(sorted.begin(), sorted.end());
    double sum = 0.0;
    for (double v : sorted) sum += v;
    m.latency.mean_s = sum / static_cast<double>(sorted.size());
    m.latency.p50_s = percentile(sorted, 50.0);
    m.latency.p95_s = percentile(sorted, 95.0);
    m.latency.p99_s = percentile(sorted, 99.0);
  }
  return m;
}

} // namespace faasim
