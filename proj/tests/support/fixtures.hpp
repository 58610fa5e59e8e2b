#pragma once

// Hand-built scenarios shared by the unit tests and the acceptance binary.

#include <filesystem>
#include <string>
#include <vector>

#include "etruck/pumdp.hpp"
#include "etruck/scenario.hpp"
#include "etruck/scenario_io.hpp"

namespace fixtures {

using namespace etruck;

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(ETRUCK_DATA_DIR) / name;
}

/// Zones 1..n on a path, depot 1, two load buses joined by an unlimited line
/// with one wood-class generator at bus 1. Charging zones map to bus 2 except
/// the depot, which maps to bus 1.
inline ScenarioData path_data(int zones, int horizon, int r_max, int n_max, std::vector<int> charging,
                              std::vector<int> delivery, int fleet = 1000) {
  ScenarioData d;
  for (int z = 1; z <= zones; ++z) d.logistics.zones.push_back(z);
  for (int z = 1; z < zones; ++z) d.logistics.edges.emplace_back(z, z + 1);
  d.logistics.depot = 1;
  d.logistics.charging_zones = std::move(charging);
  d.logistics.delivery_zones = std::move(delivery);
  for (int z : d.logistics.delivery_zones) d.logistics.population[z] = 20.0 + 10.0 * z;
  d.power.buses = {{1, BusKind::Load}, {2, BusKind::Load}};
  d.power.slack_bus = 1;
  d.power.branches = {{1, 2, 10.0}};
  d.power.generators = {{1, 0.002, 114.4, 0.0, 100.0}};
  d.power.base_load.assign(horizon, {1.0, 1.0});
  for (int z : d.logistics.charging_zones) d.coupling.zone_to_bus[z] = z == 1 ? 1 : 2;
  d.params.fleet = fleet;
  d.params.horizon = horizon;
  d.params.windows = std::min(2, horizon);
  d.params.r_max = r_max;
  d.params.n_max = n_max;
  return d;
}

/// The 3-zone, T=6, r_max=3, n_max=2 instance used by the exactness checks.
inline Scenario three_zone() { return Scenario(path_data(3, 6, 3, 2, {1, 3}, {2, 3})); }

/// 1 zone, 1 bus: the smallest valid scenario.
inline ScenarioData minimal_data(int horizon = 2) {
  ScenarioData d;
  d.logistics.zones = {1};
  d.logistics.depot = 1;
  d.logistics.charging_zones = {1};
  d.power.buses = {{1, BusKind::Load}};
  d.power.slack_bus = 1;
  d.power.generators = {{1, 0.002, 114.4, 0.0, 100.0}};
  d.power.base_load.assign(horizon, {1.0});
  d.coupling.zone_to_bus = {{1, 1}};
  d.params.horizon = horizon;
  d.params.windows = 1;
  d.params.r_max = 2;
  d.params.n_max = 1;
  return d;
}

/// Flow vector that sends `fleet` trucks along one action path from s0; the
/// path lists the actions taken at t = 0, 1, ...
inline FlowVector trajectory_flow(const StateSpace& space, const Scenario& sc, const std::vector<TruckAction>& path,
                                  double fleet) {
  FlowVector f;
  f.occupancy.assign(space.num_states(), 0.0);
  f.x.assign(space.num_actions(), 0.0);
  TruckState s = initial_state(sc);
  f.occupancy[0] = fleet;
  for (const TruckAction& a : path) {
    const std::size_t i = *space.find(s);
    bool found = false;
    for (std::size_t k = space.actions_begin(i); k < space.actions_end(i); ++k) {
      if (space.action(k) == a) {
        f.x[k] = fleet;
        s = space.state(space.next(k));
        f.occupancy[space.next(k)] += fleet;
        found = true;
      }
    }
    if (!found) throw ContractError("trajectory action not feasible");
  }
  return f;
}

}  // namespace fixtures
