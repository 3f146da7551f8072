#include "faasim/balancer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

#include "faasim/hash_ring.hpp"

namespace faasim {

std::string to_string(Policy p) {
  switch (p) {
    case Policy::CarbonAware: return "carbon-aware";
    case Policy::OpenWhiskBaseline: return "openwhisk";
    case Policy::ConsistentHashing: return "consistent-hash";
    case Policy::Greedy: return "greedy";
  }
  return "unknown";
}

std::optional<Policy> parse_policy(std::string_view name) {
  for (Policy p : all_policies()) {
    if (name == to_string(p)) return p;
  }
  return std::nullopt;
}

const std::vector<Policy>& all_policies() {
  static const std::vector<Policy> v = {Policy::CarbonAware, Policy::OpenWhiskBaseline,
                                        Policy::ConsistentHashing, Policy::Greedy};
  return v;
}

std::vector<double> weights_grid_isolated(const std::vector<double>& avail_w) {
  std::vector<double> w(avail_w.size(), 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < avail_w.size(); ++i) {
    w[i] = std::max(avail_w[i], 0.0);
    sum += w[i];
  }
  if (sum > 0.0) {
    for (double& x : w) x /= sum;
  }
  return w;
}

std::vector<double> weights_grid_connected(const std::vector<double>& intensity) {
  std::vector<double> w(intensity.size(), 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < intensity.size(); ++i) {
    if (!(intensity[i] > 0.0) || !std::isfinite(intensity[i]))
      throw std::invalid_argument("weights_grid_connected: intensity must be positive");
    w[i] = 1.0 / intensity[i];
    sum += w[i];
  }
  for (double& x : w) x /= sum;
  return w;
}

void RetryQueue::push(InvocationRequest req, SimTick now) {
  if (!req.first_enqueued) req.first_enqueued = now;
  req.retry_count += 1;
  SimTick due = now + static_cast<SimTick>(std::llround(interval_s_));
  by_due_[due].push_back(Entry{std::move(req), next_seq_++});
  ++size_;
}

std::vector<InvocationRequest> RetryQueue::drain_due(SimTick now) {
  std::vector<Entry> due;
  while (!by_due_.empty() && by_due_.begin()->first <= now) {
    auto& bucket = by_due_.begin()->second;
    due.insert(due.end(), std::make_move_iterator(bucket.begin()),
               std::make_move_iterator(bucket.end()));
    by_due_.erase(by_due_.begin());
  }
  std::sort(due.begin(), due.end(), [](const Entry& a, const Entry& b) {
    SimTick fa = a.request.first_enqueued.value_or(0);
    SimTick fb = b.request.first_enqueued.value_or(0);
    return std::tie(fa, a.seq) < std::tie(fb, b.seq);
  });
  std::vector<InvocationRequest> out;
  out.reserve(due.size());
  for (auto& e : due) out.push_back(std::move(e.request));
  size_ -= out.size();
  return out;
}

double per_function_power_w(const ServerState& s) {
  if (s.containers.empty()) return 0.0;
  return (s.p_peak_w - s.p_idle_w) / static_cast<double>(s.containers.size());
}

double running_load_w(const std::vector<ServerState>& servers,
                      const std::string& location_id, double mem_per_function) {
  double w = 0.0;
  for (const auto& s : servers) {
    if (s.location_id != location_id || !s.online) continue;
    double in_flight = mem_per_function > 0.0 ? s.mem_used / mem_per_function : 0.0;
    w += in_flight * per_function_power_w(s);
  }
  return w;
}

namespace {

bool fits_memory(const ServerState& s, const BalancerConfig& cfg) {
  return s.mem_used + cfg.mem_per_function <= s.mem_limit;
}

Selection not_placed(const InvocationRequest& req, const BalancerConfig& cfg) {
  Selection sel;
  sel.kind = req.retry_count >= cfg.max_retries ? Selection::Kind::Failed
                                                : Selection::Kind::Enqueued;
  return sel;
}

Selection assigned(const ServerState* s) {
  Selection sel;
  sel.kind = Selection::Kind::Assigned;
  sel.server = s;
  return sel;
}

// Per-location available power, computed once per decision from the last
// delivered profile snapshot. Locations without a snapshot are absent.
std::map<std::string, double> location_avail(const std::vector<ServerState>& servers,
                                             const SnapshotMap& snapshots,
                                             double mem_per_function) {
  std::map<std::string, double> avail;
  for (const auto& [loc, msg] : snapshots) {
    avail[loc] = avail_energy_w(msg, running_load_w(servers, loc, mem_per_function));
  }
  return avail;
}

Selection select_carbon_aware(const std::vector<ServerState>& servers,
                              const InvocationRequest& req, Mode mode,
                              const SnapshotMap& snapshots, const BalancerConfig& cfg) {
  std::vector<WeightedServer> weighted;
  std::map<std::string, double> avail;
  if (mode == Mode::GridIsolated) {
    avail = location_avail(servers, snapshots, cfg.mem_per_function);
    std::vector<const ServerState*> cand;
    std::vector<double> av;
    for (const auto& s : servers) {
      auto it = avail.find(s.location_id);
      if (it == avail.end()) continue; // location never reported in
      cand.push_back(&s);
      av.push_back(it->second);
    }
    std::vector<double> w = weights_grid_isolated(av);
    for (std::size_t i = 0; i < cand.size(); ++i) {
      if (w[i] > 0.0) weighted.push_back({cand[i], w[i]});
    }
  } else {
    std::vector<const ServerState*> cand;
    std::vector<double> ci;
    for (const auto& s : servers) {
      auto it = snapshots.find(s.location_id);
      if (it == snapshots.end()) continue;
      if (!(it->second.carbon_intensity > 0.0)) continue;
      cand.push_back(&s);
      ci.push_back(it->second.carbon_intensity);
    }
    if (!cand.empty()) {
      std::vector<double> w = weights_grid_connected(ci);
      for (std::size_t i = 0; i < cand.size(); ++i) weighted.push_back({cand[i], w[i]});
    }
  }
  if (weighted.empty()) return not_placed(req, cfg);

  double fpos = hash_to_unit(req.function.id);
  for (const ServerState* s : sort_servers(weighted, fpos)) {
    if (!s->online || !fits_memory(*s, cfg)) continue;
    if (mode == Mode::GridIsolated && avail.at(s->location_id) < per_function_power_w(*s))
      continue;
    if (mode == Mode::GridConnected && cfg.retry_on_high_carbon) {
      const auto& msg = snapshots.at(s->location_id);
      if (msg.carbon_intensity > cfg.high_carbon_threshold) return not_placed(req, cfg);
    }
    return assigned(s);
  }
  return not_placed(req, cfg);
}

Selection select_consistent_hash(const std::vector<ServerState>& servers,
                                 const InvocationRequest& req,
                                 const BalancerConfig& cfg) {
  std::vector<WeightedServer> weighted;
  weighted.reserve(servers.size());
  for (const auto& s : servers) weighted.push_back({&s, 1.0});
  double fpos = hash_to_unit(req.function.id);
  for (const ServerState* s : sort_servers(weighted, fpos)) {
    if (s->online && fits_memory(*s, cfg)) return assigned(s);
  }
  return not_placed(req, cfg);
}

Selection select_openwhisk(const std::vector<ServerState>& servers,
                           const InvocationRequest& req, const BalancerConfig& cfg,
                           Rng& rng) {
  // The home server is fixed by the hash alone; liveness only affects
  // whether we run there or redirect.
  double fpos = hash_to_unit(req.function.id);
  const ServerState* home = nullptr;
  for (const auto& s : servers) {
    if (!home) {
      home = &s;
      continue;
    }
    double da = ring_distance(s.ring_position, fpos);
    double db = ring_distance(home->ring_position, fpos);
    if (std::tie(da, s.id) < std::tie(db, home->id)) home = &s;
  }
  if (!home) return not_placed(req, cfg);
  if (home->online && fits_memory(*home, cfg)) return assigned(home);

  std::vector<const ServerState*> others;
  for (const auto& s : servers) {
    if (&s != home && s.online && fits_memory(s, cfg)) others.push_back(&s);
  }
  std::sort(others.begin(), others.end(),
            [](const ServerState* a, const ServerState* b) { return a->id < b->id; });
  if (others.empty()) return not_placed(req, cfg);
  auto idx = static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(others.size()) - 1));
  return assigned(others[idx]);
}

Selection select_greedy(const std::vector<ServerState>& servers,
                        const InvocationRequest& req, Mode mode,
                        const SnapshotMap& snapshots, const BalancerConfig& cfg) {
  std::map<std::string, double> avail;
  if (mode == Mode::GridIsolated)
    avail = location_avail(servers, snapshots, cfg.mem_per_function);

  struct Ranked {
    double key; // lower is better
    const ServerState* server;
  };
  std::vector<Ranked> ranked;
  for (const auto& s : servers) {
    auto it = snapshots.find(s.location_id);
    if (it == snapshots.end()) continue;
    double key = mode == Mode::GridConnected ? it->second.carbon_intensity
                                             : -avail.at(s.location_id);
    ranked.push_back({key, &s});
  }
  if (ranked.empty()) return not_placed(req, cfg);
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    return std::tie(a.key, a.server->id) < std::tie(b.key, b.server->id);
  });
  for (const auto& r : ranked) {
    const ServerState* s = r.server;
    if (!s->online || !fits_memory(*s, cfg)) continue;
    if (mode == Mode::GridIsolated && avail.at(s->location_id) < per_function_power_w(*s))
      continue;
    return assigned(s);
  }
  return not_placed(req, cfg);
}

} // namespace

Selection select_server(Policy policy, const std::vector<ServerState>& servers,
                        const InvocationRequest& req, Mode mode,
                        const SnapshotMap& snapshots, const BalancerConfig& cfg,
                        Rng& rng) {
  if (servers.empty()) return not_placed(req, cfg);
  switch (policy) {
    case Policy::CarbonAware:
      return select_carbon_aware(servers, req, mode, snapshots, cfg);
    case Policy::OpenWhiskBaseline:
      return select_openwhisk(servers, req, cfg, rng);
    case Policy::ConsistentHashing:
      return select_consistent_hash(servers, req, cfg);
    case Policy::Greedy:
      return select_greedy(servers, req, mode, snapshots, cfg);
  }
  return not_placed(req, cfg);
}

} // namespace faasim
