#include "faasim/energy.hpp"

#include <algorithm>

namespace faasim {

double power_draw(const ServerState& s, double load) {
  if (!s.online) return 0.0;
  double l = std::clamp(load, 0.0, 1.0);
  return s.p_idle_w + l * (s.p_peak_w - s.p_idle_w);
}

double op_time_s(const EnergyState& e, double p_max_w) {
  if (!(p_max_w > 0.0)) return 0.0;
  double buffer_wh = e.buffer_fraction * e.battery_capacity_wh;
  return buffer_wh / p_max_w * 3600.0;
}

double usable_discharge_w(const EnergyState& e) {
  double headroom_wh = e.battery_level_wh - e.buffer_wh();
  if (headroom_wh <= 0.0) return 0.0;
  // Wh of headroom spent over one hour is numerically watts.
  return std::min(e.max_discharge_rate_w, headroom_wh);
}

double avail_energy_w(const EnergyState& e, double running_load_w) {
  return usable_discharge_w(e) + e.solar_output_w - running_load_w;
}

double avail_energy_w(const EnergyProfileMsg& m, double running_load_w) {
  EnergyState e;
  e.battery_level_wh = m.battery_level_wh;
  e.battery_capacity_wh = m.battery_capacity_wh;
  e.max_discharge_rate_w = m.max_discharge_rate_w;
  e.buffer_fraction = m.buffer_fraction;
  e.solar_output_w = m.solar_output_w;
  return avail_energy_w(e, running_load_w);
}

BatteryStep battery_step(const EnergyState& e, double solar_w, double load_w,
                         double dt_s) {
  BatteryStep out;
  out.state = e;
  out.state.solar_output_w = solar_w;
  const double level = e.battery_level_wh;
  double net_w = solar_w - load_w;
  // The reported charge/discharge is defined as the exact level delta, so
  // the ledger balances bit-for-bit even where rounding trims a transfer.
  if (net_w >= 0.0) {
    double next = std::min(level + net_w * dt_s / 3600.0, e.battery_capacity_wh);
    out.state.battery_level_wh = next;
    out.charged_wh = next - level;
  } else {
    double demand_w = -net_w;
    double rate_w = std::min(demand_w, e.max_discharge_rate_w);
    double want_wh = rate_w * dt_s / 3600.0;
    double got_wh = std::min(want_wh, level);
    double next = level - got_wh;
    out.state.battery_level_wh = next;
    out.discharged_wh = level - next;
    out.shutdown = rate_w < demand_w || got_wh < want_wh;
  }
  return out;
}

double scaled_emissions_lbs(double energy_wh, double moer_lbs_per_mwh) {
  return energy_wh / 1.0e6 * moer_lbs_per_mwh;
}

void ProfileChannel::publish(EnergyProfileMsg msg, SimTick deliver_at) {
  pending_.emplace_back(deliver_at, std::move(msg));
}

void ProfileChannel::advance(SimTick now) {
  // Publishes arrive in non-decreasing delivery order (fixed delay), so the
  // due prefix is exactly what must be delivered.
  while (!pending_.empty() && pending_.front().first <= now) {
    EnergyProfileMsg& m = pending_.front().second;
    visible_[m.location_id] = std::move(m);
    pending_.pop_front();
  }
}

} // namespace faasim
