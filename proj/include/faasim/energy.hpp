#pragma once

#include <deque>
#include <map>
#include <string>
#include <utility>

#include "faasim/core.hpp"

namespace faasim {

// Battery + solar state of one grid-isolated site.
struct EnergyState {
  std::string location_id;
  double battery_level_wh = 0.0;
  double battery_capacity_wh = 1.0;
  double max_discharge_rate_w = 1.0;
  // Fraction of capacity held back as an operating reserve. It gates
  // scheduling decisions (avail_energy_w); battery_step may still drain
  // through it before the site browns out.
  double buffer_fraction = 0.2;
  double solar_output_w = 0.0;

  double buffer_wh() const { return buffer_fraction * battery_capacity_wh; }
};

// Periodic self-report a site publishes to the balancer. Delivery may lag,
// so the balancer schedules on a possibly stale snapshot.
struct EnergyProfileMsg {
  std::string location_id;
  SimTick timestamp = 0;
  double carbon_intensity = 0.0; // lbs CO2 per MWh drawn (grid-connected)
  double battery_level_wh = 0.0;
  double battery_capacity_wh = 0.0;
  double max_discharge_rate_w = 0.0;
  double buffer_fraction = 0.0;
  double solar_output_w = 0.0;
};

// Electrical draw of one server at the given busy fraction: idle floor plus a
// linear dynamic term. An offline server draws nothing.
double power_draw(const ServerState& s, double load);

// How long the operating reserve alone could sustain a draw of p_max_w,
// in seconds.
double op_time_s(const EnergyState& e, double p_max_w);

// Power the battery can contribute right now without dipping into the
// reserve: zero at or below the buffer, then the Wh headroom above the
// buffer spread over a one-hour horizon, capped by the discharge rate.
double usable_discharge_w(const EnergyState& e);

// Headroom for additional load at a site: battery contribution plus solar,
// minus what already runs there. Negative means the site is oversubscribed.
double avail_energy_w(const EnergyState& e, double running_load_w);
double avail_energy_w(const EnergyProfileMsg& m, double running_load_w);

struct BatteryStep {
  EnergyState state;
  bool shutdown = false;    // demand could not be met this step
  double charged_wh = 0.0;  // energy into the battery
  double discharged_wh = 0.0; // energy out of the battery
};

// Advances the battery by dt_s seconds under the given solar input and site
// load. Surplus charges the battery (clamped at capacity; excess is spilled);
// deficit discharges it, limited by max_discharge_rate_w and by the energy
// actually stored. `shutdown` reports an unmet deficit. By construction the
// level change equals charged_wh - discharged_wh exactly.
BatteryStep battery_step(const EnergyState& e, double solar_w, double load_w,
                         double dt_s);

// Emissions attributed to drawing `energy_wh` from a grid whose marginal
// operating emissions rate is `moer_lbs_per_mwh`.
double scaled_emissions_lbs(double energy_wh, double moer_lbs_per_mwh);

// Delivers site profile messages after a fixed transit delay. The balancer
// only ever sees the last delivered message per location; a location that
// has never delivered one is simply unknown.
class ProfileChannel {
 public:
  void publish(EnergyProfileMsg msg, SimTick deliver_at);
  // Makes every message with deliver_at <= now visible.
  void advance(SimTick now);
  const std::map<std::string, EnergyProfileMsg>& visible() const { return visible_; }

 private:
  std::deque<std::pair<SimTick, EnergyProfileMsg>> pending_;
  std::map<std::string, EnergyProfileMsg> visible_;
};

} // namespace faasim
