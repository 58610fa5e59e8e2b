#pragma once

// JSON (de)serialization of scenarios.
//
// Layout:
//   logistics: {zones, edges, depot, charging_zones, delivery_zones, population}
//   power:     {buses:[{id,kind}], slack_bus, branches:[{from,to,b,fmin,fmax}],
//               generators:[{bus,c2,c1,gmin,gmax}], base_load:[[...]]}
//   coupling:  {zone_to_bus, phi_soc, phi_kw, energy_base_kw}
//   params:    {Q,n_max,r_max,T,K,delta_h,rho,eps1,eps2,demand_a,demand_b}
// Unbounded branch limits are written as null.

#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include <json.hpp>

#include "etruck/scenario.hpp"

namespace etruck {

namespace detail {

using json = nlohmann::json;

inline const json& field(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw ValidationError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(path + "." + key, "missing required field");
  return *it;
}

template <class T>
T as(const json& value, const std::string& path) {
  try {
    if constexpr (std::is_same_v<T, int>) {
      if (!value.is_number_integer()) throw ValidationError(path, "expected an integer");
    } else if constexpr (std::is_same_v<T, double>) {
      if (!value.is_number()) throw ValidationError(path, "expected a number");
    }
    return value.get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(path, e.what());
  }
}

inline int parse_id(const std::string& key, const std::string& path) {
  std::size_t used = 0;
  int id = 0;
  try {
    id = std::stoi(key, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != key.size() || key.empty()) throw ValidationError(path, "key '" + key + "' is not an integer id");
  return id;
}

inline std::vector<int> id_list(const json& value, const std::string& path) {
  if (!value.is_array()) throw ValidationError(path, "expected an array");
  std::vector<int> out;
  for (std::size_t i = 0; i < value.size(); ++i) out.push_back(as<int>(value[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline double bound(const json& obj, const char* key, const std::string& path, double if_null) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return if_null;
  return as<double>(*it, path + "." + key);
}

inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace detail

inline ScenarioData scenario_data_from_json(const nlohmann::json& root) {
  using detail::as;
  using detail::field;
  ScenarioData d;

  const auto& lg = field(root, "logistics", "$");
  d.logistics.zones = detail::id_list(field(lg, "zones", "logistics"), "logistics.zones");
  const auto& edges = field(lg, "edges", "logistics");
  if (!edges.is_array()) throw ValidationError("logistics.edges", "expected an array");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const std::string p = "logistics.edges[" + std::to_string(i) + "]";
    if (!edges[i].is_array() || edges[i].size() != 2) throw ValidationError(p, "expected a [zone, zone] pair");
    d.logistics.edges.emplace_back(as<int>(edges[i][0], p), as<int>(edges[i][1], p));
  }
  d.logistics.depot = as<int>(field(lg, "depot", "logistics"), "logistics.depot");
  d.logistics.charging_zones = detail::id_list(field(lg, "charging_zones", "logistics"), "logistics.charging_zones");
  d.logistics.delivery_zones = detail::id_list(field(lg, "delivery_zones", "logistics"), "logistics.delivery_zones");
  const auto& pop = field(lg, "population", "logistics");
  if (!pop.is_object()) throw ValidationError("logistics.population", "expected an object");
  for (auto it = pop.begin(); it != pop.end(); ++it) {
    const std::string p = "logistics.population." + it.key();
    d.logistics.population[detail::parse_id(it.key(), p)] = as<double>(it.value(), p);
  }

  const auto& pw = field(root, "power", "$");
  const auto& buses = field(pw, "buses", "power");
  if (!buses.is_array()) throw ValidationError("power.buses", "expected an array");
  for (std::size_t i = 0; i < buses.size(); ++i) {
    const std::string p = "power.buses[" + std::to_string(i) + "]";
    Bus bus;
    bus.id = as<int>(field(buses[i], "id", p), p + ".id");
    const auto kind = as<std::string>(field(buses[i], "kind", p), p + ".kind");
    if (kind == "gen") bus.kind = BusKind::Generator;
    else if (kind == "load") bus.kind = BusKind::Load;
    else throw ValidationError(p + ".kind", "must be \"gen\" or \"load\"");
    d.power.buses.push_back(bus);
  }
  d.power.slack_bus = as<int>(field(pw, "slack_bus", "power"), "power.slack_bus");
  const auto& branches = field(pw, "branches", "power");
  if (!branches.is_array()) throw ValidationError("power.branches", "expected an array");
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < branches.size(); ++i) {
    const std::string p = "power.branches[" + std::to_string(i) + "]";
    Branch br;
    br.from = as<int>(field(branches[i], "from", p), p + ".from");
    br.to = as<int>(field(branches[i], "to", p), p + ".to");
    br.susceptance = as<double>(field(branches[i], "b", p), p + ".b");
    br.flow_min = detail::bound(branches[i], "fmin", p, -inf);
    br.flow_max = detail::bound(branches[i], "fmax", p, inf);
    d.power.branches.push_back(br);
  }
  const auto& gens = field(pw, "generators", "power");
  if (!gens.is_array()) throw ValidationError("power.generators", "expected an array");
  for (std::size_t i = 0; i < gens.size(); ++i) {
    const std::string p = "power.generators[" + std::to_string(i) + "]";
    Generator g;
    g.bus = as<int>(field(gens[i], "bus", p), p + ".bus");
    g.c2 = as<double>(field(gens[i], "c2", p), p + ".c2");
    g.c1 = as<double>(field(gens[i], "c1", p), p + ".c1");
    g.p_min = as<double>(field(gens[i], "gmin", p), p + ".gmin");
    g.p_max = as<double>(field(gens[i], "gmax", p), p + ".gmax");
    d.power.generators.push_back(g);
  }
  const auto& load = field(pw, "base_load", "power");
  if (!load.is_array()) throw ValidationError("power.base_load", "expected an array of rows");
  for (std::size_t t = 0; t < load.size(); ++t) {
    const std::string p = "power.base_load[" + std::to_string(t) + "]";
    if (!load[t].is_array()) throw ValidationError(p, "expected an array");
    std::vector<double> row;
    for (std::size_t j = 0; j < load[t].size(); ++j) row.push_back(as<double>(load[t][j], p));
    d.power.base_load.push_back(std::move(row));
  }

  const auto& cp = field(root, "coupling", "$");
  const auto& z2b = field(cp, "zone_to_bus", "coupling");
  if (!z2b.is_object()) throw ValidationError("coupling.zone_to_bus", "expected an object");
  for (auto it = z2b.begin(); it != z2b.end(); ++it) {
    const std::string p = "coupling.zone_to_bus." + it.key();
    d.coupling.zone_to_bus[detail::parse_id(it.key(), p)] = as<int>(it.value(), p);
  }
  d.coupling.phi_soc = as<int>(field(cp, "phi_soc", "coupling"), "coupling.phi_soc");
  d.coupling.phi_kw = as<double>(field(cp, "phi_kw", "coupling"), "coupling.phi_kw");
  d.coupling.energy_base_kw = as<double>(field(cp, "energy_base_kw", "coupling"), "coupling.energy_base_kw");

  const auto& pr = field(root, "params", "$");
  Params& q = d.params;
  q.fleet = as<int>(field(pr, "Q", "params"), "params.Q");
  q.n_max = as<int>(field(pr, "n_max", "params"), "params.n_max");
  q.r_max = as<int>(field(pr, "r_max", "params"), "params.r_max");
  q.horizon = as<int>(field(pr, "T", "params"), "params.T");
  q.windows = as<int>(field(pr, "K", "params"), "params.K");
  q.step_hours = as<double>(field(pr, "delta_h", "params"), "params.delta_h");
  q.teleport_penalty = as<double>(field(pr, "rho", "params"), "params.rho");
  q.eps_inner = as<double>(field(pr, "eps1", "params"), "params.eps1");
  q.eps_outer = as<double>(field(pr, "eps2", "params"), "params.eps2");
  q.demand_a = as<double>(field(pr, "demand_a", "params"), "params.demand_a");
  q.demand_b = as<double>(field(pr, "demand_b", "params"), "params.demand_b");
  return d;
}

inline nlohmann::json scenario_to_json(const ScenarioData& d) {
  using json = nlohmann::json;
  json root;

  json& lg = root["logistics"];
  lg["zones"] = d.logistics.zones;
  lg["edges"] = json::array();
  for (auto [a, b] : d.logistics.edges) lg["edges"].push_back({a, b});
  lg["depot"] = d.logistics.depot;
  lg["charging_zones"] = d.logistics.charging_zones;
  lg["delivery_zones"] = d.logistics.delivery_zones;
  lg["population"] = json::object();
  for (auto [id, v] : d.logistics.population) lg["population"][std::to_string(id)] = v;

  json& pw = root["power"];
  pw["buses"] = json::array();
  for (const Bus& b : d.power.buses)
    pw["buses"].push_back({{"id", b.id}, {"kind", b.kind == BusKind::Generator ? "gen" : "load"}});
  pw["slack_bus"] = d.power.slack_bus;
  pw["branches"] = json::array();
  for (const Branch& br : d.power.branches) {
    pw["branches"].push_back({{"from", br.from},
                              {"to", br.to},
                              {"b", br.susceptance},
                              {"fmin", detail::finite_or_null(br.flow_min)},
                              {"fmax", detail::finite_or_null(br.flow_max)}});
  }
  pw["generators"] = json::array();
  for (const Generator& g : d.power.generators)
    pw["generators"].push_back({{"bus", g.bus}, {"c2", g.c2}, {"c1", g.c1}, {"gmin", g.p_min}, {"gmax", g.p_max}});
  pw["base_load"] = d.power.base_load;

  json& cp = root["coupling"];
  cp["zone_to_bus"] = json::object();
  for (auto [z, b] : d.coupling.zone_to_bus) cp["zone_to_bus"][std::to_string(z)] = b;
  cp["phi_soc"] = d.coupling.phi_soc;
  cp["phi_kw"] = d.coupling.phi_kw;
  cp["energy_base_kw"] = d.coupling.energy_base_kw;

  const Params& q = d.params;
  root["params"] = {{"Q", q.fleet},          {"n_max", q.n_max},       {"r_max", q.r_max},
                    {"T", q.horizon},        {"K", q.windows},         {"delta_h", q.step_hours},
                    {"rho", q.teleport_penalty}, {"eps1", q.eps_inner}, {"eps2", q.eps_outer},
                    {"demand_a", q.demand_a}, {"demand_b", q.demand_b}};
  return root;
}

inline Scenario parse_scenario(const std::string& text) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("$", std::string("invalid JSON: ") + e.what());
  }
  return Scenario(scenario_data_from_json(root));
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path.string(), "cannot open scenario file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario(buffer.str());
}

inline void save_scenario(const ScenarioData& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << scenario_to_json(data).dump(1) << '\n';
}

}  // namespace etruck
