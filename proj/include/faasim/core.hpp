#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace faasim {

// Simulation time is an integer tick counter. One tick is one second unless a
// run is configured otherwise; sub-second effects (start penalties, short
// executions) are rounded up to whole ticks when they occupy a container.
using SimTick = std::int64_t;

enum class Mode {
  GridConnected,  // servers draw from the grid, accounting is carbon-based
  GridIsolated,   // servers draw from battery + solar, accounting is uptime-based
};

struct FunctionDef {
  std::string id;
  int func_type = 0;             // container image class, in [0, num_function_types)
  double mean_exec_time_s = 1.0; // > 0
};

struct InvocationRequest {
  FunctionDef function;
  SimTick arrival = 0;
  int retry_count = 0;
  std::optional<SimTick> first_enqueued; // set the first time the request is queued
};

// One container slot on a server. A slot keeps the image type of the last
// function it ran; reusing the same type is a warm start, switching is cold.
struct ContainerSlot {
  std::optional<int> current_type;
  std::optional<SimTick> busy_until; // busy during [start, busy_until); free when unset
};

struct ServerState {
  std::string id;
  std::string location_id;
  double ring_position = 0.0; // in [0,1)
  double mem_limit = 3.0;     // abstract units; one unit per in-flight function
  double mem_used = 0.0;
  std::vector<ContainerSlot> containers = std::vector<ContainerSlot>(3);
  double p_idle_w = 60.0;
  double p_peak_w = 200.0;
  bool online = true;

  int busy_containers(SimTick now) const;
  // Fraction of containers busy during the tick starting at `now`, in [0,1].
  double load(SimTick now) const;
};

// Returns one message per violated invariant; empty means the state is sane.
std::vector<std::string> validate_server(const ServerState& s);

} // namespace faasim
