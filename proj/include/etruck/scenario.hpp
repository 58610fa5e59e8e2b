#pragma once

// Problem instance: logistics graph, power grid, coupling between them, and
// model parameters. A Scenario is validated on construction and immutable.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "etruck/error.hpp"
#include "etruck/types.hpp"

namespace etruck {

struct LogisticsNetwork {
  std::vector<int> zones;
  std::vector<std::pair<int, int>> edges;  // undirected
  int depot = 0;
  std::vector<int> charging_zones;
  std::vector<int> delivery_zones;
  std::map<int, double> population;

  bool operator==(const LogisticsNetwork&) const = default;
};

enum class BusKind { Generator, Load };

struct Bus {
  int id = 0;
  BusKind kind = BusKind::Load;

  bool operator==(const Bus&) const = default;
};

struct Branch {
  int from = 0;
  int to = 0;
  double susceptance = 1.0;
  double flow_min = -std::numeric_limits<double>::infinity();
  double flow_max = std::numeric_limits<double>::infinity();

  bool operator==(const Branch&) const = default;
};

struct Generator {
  int bus = 0;
  double c2 = 0.0;  // $/(p.u.)^2
  double c1 = 0.0;  // $/p.u.
  double p_min = 0.0;
  double p_max = 0.0;

  bool operator==(const Generator&) const = default;
};

struct PowerGrid {
  std::vector<Bus> buses;
  int slack_bus = 0;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  // base_load[t][j]: per-unit load at the j-th load bus (in bus list order).
  std::vector<std::vector<double>> base_load;

  bool operator==(const PowerGrid&) const = default;
};

struct Coupling {
  std::map<int, int> zone_to_bus;  // charging zone id -> load bus id
  int phi_soc = 1;                 // SOC units gained per charging step
  double phi_kw = 150.0;           // charger power per truck
  double energy_base_kw = 1000.0;  // per-unit base for charging load

  bool operator==(const Coupling&) const = default;
};

/// Model parameters; defaults are the 36-zone replica values.
struct Params {
  int fleet = 1000;
  int n_max = 10;
  int r_max = 12;
  int horizon = 32;
  int windows = 4;
  double step_hours = 0.25;
  double teleport_penalty = 1e5;
  double eps_inner = 1e-6;
  double eps_outer = 1e-4;
  double demand_a = 10.0;
  double demand_b = 5.0;

  bool operator==(const Params&) const = default;
};

struct ScenarioData {
  LogisticsNetwork logistics;
  PowerGrid power;
  Coupling coupling;
  Params params;

  bool operator==(const ScenarioData&) const = default;
};

class Scenario {
 public:
  explicit Scenario(ScenarioData data) : data_(std::move(data)) {
    validate_params();
    index_logistics();
    index_power();
    index_coupling();
  }

  const ScenarioData& data() const noexcept { return data_; }
  const Params& params() const noexcept { return data_.params; }

  /// Copy with a different fleet size (everything else unchanged).
  Scenario with_fleet(int fleet) const {
    ScenarioData d = data_;
    d.params.fleet = fleet;
    return Scenario(std::move(d));
  }

  // Logistics side. Zones are addressed by dense index [0, num_zones).
  int num_zones() const noexcept { return static_cast<int>(data_.logistics.zones.size()); }
  int zone_id(int zone) const { return data_.logistics.zones.at(zone); }
  int zone_index(int id) const {
    auto it = zone_lookup_.find(id);
    if (it == zone_lookup_.end()) throw ContractError("unknown zone id " + std::to_string(id));
    return it->second;
  }
  int depot() const noexcept { return depot_; }
  std::span<const int> neighbors(int zone) const { return adjacency_.at(zone); }
  bool is_charging(int zone) const { return charging_slot_.at(zone) >= 0; }
  bool is_delivery(int zone) const { return delivery_slot_.at(zone) >= 0; }
  /// Column of a zone in delivery-indexed arrays, or -1.
  int delivery_slot(int zone) const { return delivery_slot_.at(zone); }
  /// Column of a zone in charging-indexed arrays, or -1.
  int charging_slot(int zone) const { return charging_slot_.at(zone); }
  int num_delivery_zones() const noexcept { return static_cast<int>(delivery_zones_.size()); }
  int num_charging_zones() const noexcept { return static_cast<int>(charging_zones_.size()); }
  /// Zone index of delivery column `slot`.
  int delivery_zone(int slot) const { return delivery_zones_.at(slot); }
  int charging_zone(int slot) const { return charging_zones_.at(slot); }
  double population(int delivery_slot) const { return population_.at(delivery_slot); }

  // Power side. Buses are addressed by dense index [0, num_buses).
  int num_buses() const noexcept { return static_cast<int>(data_.power.buses.size()); }
  int bus_id(int bus) const { return data_.power.buses.at(bus).id; }
  int bus_index(int id) const {
    auto it = bus_lookup_.find(id);
    if (it == bus_lookup_.end()) throw ContractError("unknown bus id " + std::to_string(id));
    return it->second;
  }
  int slack() const noexcept { return slack_; }
  int num_load_buses() const noexcept { return static_cast<int>(load_buses_.size()); }
  /// Bus index of load column `slot`.
  int load_bus(int slot) const { return load_buses_.at(slot); }
  /// Load column of a bus, or -1 for generator-only buses.
  int load_slot(int bus) const { return load_slot_.at(bus); }
  const PriceField& base_load() const noexcept { return base_load_; }

  /// Load column that charging column `slot` draws from (the incidence M).
  int charging_load_slot(int charging_slot) const { return charging_load_slot_.at(charging_slot); }

  /// Delivery window of time step t.
  int window_of(int t) const noexcept {
    return static_cast<int>(static_cast<long long>(t) * data_.params.windows / data_.params.horizon);
  }

  /// Per-unit electrical load of one truck for one charging step.
  double energy_per_step() const noexcept {
    return data_.coupling.phi_kw * data_.params.step_hours / data_.coupling.energy_base_kw;
  }

 private:
  void validate_params() const {
    const Params& p = data_.params;
    auto positive_int = [](int v, const char* name) {
      if (v < 1) throw ValidationError(std::string("params.") + name, "must be a positive integer");
    };
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v))
        throw ValidationError(std::string("params.") + name, "must be finite and > 0");
    };
    if (p.fleet < 0) throw ValidationError("params.Q", "must be >= 0");
    positive_int(p.n_max, "n_max");
    positive_int(p.r_max, "r_max");
    positive_int(p.horizon, "T");
    positive_int(p.windows, "K");
    if (p.windows > p.horizon) throw ValidationError("params.K", "must not exceed T");
    positive(p.step_hours, "delta_h");
    positive(p.teleport_penalty, "rho");
    positive(p.eps_inner, "eps1");
    positive(p.eps_outer, "eps2");
    if (!std::isfinite(p.demand_a)) throw ValidationError("params.demand_a", "must be finite");
    positive(p.demand_b, "demand_b");
  }

  void index_logistics() {
    const LogisticsNetwork& g = data_.logistics;
    if (g.zones.empty()) throw ValidationError("logistics.zones", "must not be empty");
    for (std::size_t i = 0; i < g.zones.size(); ++i) {
      if (!zone_lookup_.emplace(g.zones[i], static_cast<int>(i)).second)
        throw ValidationError("logistics.zones", "duplicate zone id " + std::to_string(g.zones[i]));
    }
    auto lookup = [&](int id, const std::string& field) {
      auto it = zone_lookup_.find(id);
      if (it == zone_lookup_.end())
        throw ValidationError(field, "unknown zone id " + std::to_string(id));
      return it->second;
    };

    const int n = num_zones();
    std::vector<std::set<int>> adj(n);
    for (auto [a, b] : g.edges) {
      const int ia = lookup(a, "logistics.edges");
      const int ib = lookup(b, "logistics.edges");
      if (ia == ib) throw ValidationError("logistics.edges", "self loop at zone " + std::to_string(a));
      adj[ia].insert(ib);
      adj[ib].insert(ia);
    }
    adjacency_.resize(n);
    for (int i = 0; i < n; ++i) adjacency_[i].assign(adj[i].begin(), adj[i].end());
    if (!connected(adjacency_)) throw ValidationError("logistics.edges", "zone graph is not connected");

    depot_ = lookup(g.depot, "logistics.depot");

    charging_slot_.assign(n, -1);
    for (int id : g.charging_zones) {
      const int z = lookup(id, "logistics.charging_zones");
      if (charging_slot_[z] >= 0) throw ValidationError("logistics.charging_zones", "duplicate zone id " + std::to_string(id));
      charging_slot_[z] = 0;
    }
    if (charging_slot_[depot_] < 0)
      throw ValidationError("logistics.charging_zones", "depot must offer charging");
    for (int z = 0; z < n; ++z) {
      if (charging_slot_[z] >= 0) {
        charging_slot_[z] = static_cast<int>(charging_zones_.size());
        charging_zones_.push_back(z);
      }
    }

    delivery_slot_.assign(n, -1);
    for (int id : g.delivery_zones) {
      const int z = lookup(id, "logistics.delivery_zones");
      if (delivery_slot_[z] >= 0) throw ValidationError("logistics.delivery_zones", "duplicate zone id " + std::to_string(id));
      delivery_slot_[z] = 0;
    }
    for (int z = 0; z < n; ++z) {
      if (delivery_slot_[z] < 0) continue;
      delivery_slot_[z] = static_cast<int>(delivery_zones_.size());
      delivery_zones_.push_back(z);
      const std::string field = "logistics.population." + std::to_string(zone_id(z));
      auto it = g.population.find(zone_id(z));
      if (it == g.population.end()) throw ValidationError(field, "missing for delivery zone");
      if (!(it->second > 0.0) || !std::isfinite(it->second)) throw ValidationError(field, "must be > 0");
      population_.push_back(it->second);
    }
    for (auto [id, value] : g.population) {
      lookup(id, "logistics.population");
      if (!(value > 0.0) || !std::isfinite(value))
        throw ValidationError("logistics.population." + std::to_string(id), "must be > 0");
    }
  }

  void index_power() {
    const PowerGrid& p = data_.power;
    if (p.buses.empty()) throw ValidationError("power.buses", "must not be empty");
    for (std::size_t i = 0; i < p.buses.size(); ++i) {
      if (!bus_lookup_.emplace(p.buses[i].id, static_cast<int>(i)).second)
        throw ValidationError("power.buses", "duplicate bus id " + std::to_string(p.buses[i].id));
    }
    auto lookup = [&](int id, const std::string& field) {
      auto it = bus_lookup_.find(id);
      if (it == bus_lookup_.end()) throw ValidationError(field, "unknown bus id " + std::to_string(id));
      return it->second;
    };

    const int n = num_buses();
    std::vector<std::vector<int>> adj(n);
    for (std::size_t e = 0; e < p.branches.size(); ++e) {
      const Branch& br = p.branches[e];
      const std::string field = "power.branches[" + std::to_string(e) + "]";
      const int a = lookup(br.from, field + ".from");
      const int b = lookup(br.to, field + ".to");
      if (a == b) throw ValidationError(field, "self loop");
      if (!(br.susceptance > 0.0) || !std::isfinite(br.susceptance))
        throw ValidationError(field + ".b", "susceptance must be finite and > 0");
      if (std::isnan(br.flow_min) || std::isnan(br.flow_max) || br.flow_min > 0.0 || br.flow_max < 0.0)
        throw ValidationError(field, "flow limits must satisfy fmin <= 0 <= fmax");
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
    if (!connected(adj)) throw ValidationError("power.branches", "bus graph is not connected");

    std::vector<int> gens_at(n, 0);
    for (std::size_t k = 0; k < p.generators.size(); ++k) {
      const Generator& gen = p.generators[k];
      const std::string field = "power.generators[" + std::to_string(k) + "]";
      gens_at[lookup(gen.bus, field + ".bus")] += 1;
      if (!(gen.c2 > 0.0) || !std::isfinite(gen.c2)) throw ValidationError(field + ".c2", "must be > 0");
      if (!(gen.c1 > 0.0) || !std::isfinite(gen.c1)) throw ValidationError(field + ".c1", "must be > 0");
      if (!std::isfinite(gen.p_min) || !std::isfinite(gen.p_max) || gen.p_min > gen.p_max)
        throw ValidationError(field, "requires finite gmin <= gmax");
    }
    slack_ = lookup(p.slack_bus, "power.slack_bus");
    if (gens_at[slack_] == 0) throw ValidationError("power.slack_bus", "must host a generator");

    load_slot_.assign(n, -1);
    for (int b = 0; b < n; ++b) {
      if (p.buses[b].kind == BusKind::Load) {
        load_slot_[b] = static_cast<int>(load_buses_.size());
        load_buses_.push_back(b);
      }
    }

    const int T = data_.params.horizon;
    if (static_cast<int>(p.base_load.size()) != T)
      throw ValidationError("power.base_load", "must have T=" + std::to_string(T) + " rows");
    base_load_.resize(T, num_load_buses());
    for (int t = 0; t < T; ++t) {
      if (static_cast<int>(p.base_load[t].size()) != num_load_buses())
        throw ValidationError("power.base_load[" + std::to_string(t) + "]",
                              "must have one entry per load bus (" + std::to_string(num_load_buses()) + ")");
      for (int j = 0; j < num_load_buses(); ++j) {
        const double v = p.base_load[t][j];
        if (!(v >= 0.0) || !std::isfinite(v))
          throw ValidationError("power.base_load[" + std::to_string(t) + "]", "must be finite and >= 0");
        base_load_(t, j) = v;
      }
    }
  }

  void index_coupling() {
    const Coupling& c = data_.coupling;
    if (c.phi_soc < 1) throw ValidationError("coupling.phi_soc", "must be an integer >= 1");
    if (!(c.phi_kw > 0.0) || !std::isfinite(c.phi_kw)) throw ValidationError("coupling.phi_kw", "must be > 0");
    if (!(c.energy_base_kw > 0.0) || !std::isfinite(c.energy_base_kw))
      throw ValidationError("coupling.energy_base_kw", "must be > 0");
    for (auto [zone, bus] : c.zone_to_bus) {
      const std::string field = "coupling.zone_to_bus." + std::to_string(zone);
      if (!zone_lookup_.contains(zone)) throw ValidationError(field, "unknown zone id");
      auto it = bus_lookup_.find(bus);
      if (it == bus_lookup_.end()) throw ValidationError(field, "unknown bus id " + std::to_string(bus));
      if (load_slot_[it->second] < 0) throw ValidationError(field, "must map to a load bus");
    }
    charging_load_slot_.resize(charging_zones_.size());
    for (std::size_t s = 0; s < charging_zones_.size(); ++s) {
      const int id = zone_id(charging_zones_[s]);
      auto it = c.zone_to_bus.find(id);
      if (it == c.zone_to_bus.end())
        throw ValidationError("coupling.zone_to_bus." + std::to_string(id), "charging zone must map to a load bus");
      charging_load_slot_[s] = load_slot_[bus_lookup_.at(it->second)];
    }
  }

  static bool connected(const std::vector<std::vector<int>>& adj) {
    if (adj.empty()) return true;
    std::vector<char> seen(adj.size(), 0);
    std::queue<int> frontier;
    frontier.push(0);
    seen[0] = 1;
    std::size_t count = 1;
    while (!frontier.empty()) {
      const int v = frontier.front();
      frontier.pop();
      for (int w : adj[v]) {
        if (!seen[w]) {
          seen[w] = 1;
          ++count;
          frontier.push(w);
        }
      }
    }
    return count == adj.size();
  }

  ScenarioData data_;

  std::map<int, int> zone_lookup_;
  std::vector<std::vector<int>> adjacency_;
  int depot_ = 0;
  std::vector<int> charging_slot_, delivery_slot_;
  std::vector<int> charging_zones_, delivery_zones_;
  std::vector<double> population_;

  std::map<int, int> bus_lookup_;
  int slack_ = 0;
  std::vector<int> load_buses_, load_slot_;
  PriceField base_load_;

  std::vector<int> charging_load_slot_;
};

}  // namespace etruck
