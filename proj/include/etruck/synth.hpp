#pragma once

// Deterministic synthetic scenario generator. The same (seed, sizes, options)
// always yields the same scenario, bit for bit, on any platform: random draws
// are mapped from raw mt19937_64 output rather than through the
// implementation-defined standard distributions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <utility>

#include "etruck/scenario.hpp"

namespace etruck {

struct SynthOptions {
  Params params{};
  double load_per_bus = 20.0;         // mean base load per bus, p.u.
  double capacity_margin = 1.6;       // total capacity / peak base load
  double population_min = 10000.0;
  double population_max = 50000.0;
  double charging_fraction = 1.0 / 3.0;
  double cost_spread = 0.01;          // per-generator relative deviation of c1 from its class average
  double line_headroom_min = 3.9;     // line limit / peak proportional-dispatch flow
  double line_headroom_max = 9.0;
  double line_floor = 0.75;           // smallest line limit, as a fraction of load_per_bus
  int phi_soc = 1;
  double phi_kw = 150.0;
  double energy_base_kw = 1000.0;
};

// Generator class averages: (c2 $/(p.u.)^2, c1 $/p.u.). Individual units
// deviate from these by up to cost_spread in c1 and 25% in c2.
inline constexpr double kWoodC2 = 0.002, kWoodC1 = 114.4;
inline constexpr double kDieselC2 = 0.004, kDieselC1 = 116.5;

namespace detail {

class SynthRng {
 public:
  explicit SynthRng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int below(int n) { return static_cast<int>(uniform() * n); }
  bool chance(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace detail

/// Base-load time profile: flat with a midday bump and a smaller afternoon one.
inline double base_load_shape(int t, int horizon) {
  const double x = static_cast<double>(t);
  const double T = static_cast<double>(horizon);
  auto bump = [&](double centre, double width) {
    const double u = (x - centre * T) / (width * T);
    return std::exp(-u * u);
  };
  return 1.0 + 0.12 * bump(0.44, 0.12) + 0.06 * bump(0.80, 0.08);
}

inline ScenarioData synth_scenario_data(std::uint64_t seed, int n_zones, int n_buses, const SynthOptions& opt = {}) {
  if (n_zones < 1) throw ValidationError("synth.zones", "must be >= 1");
  if (n_buses < 2) throw ValidationError("synth.buses", "must be >= 2");
  detail::SynthRng rng(seed);
  ScenarioData d;
  d.params = opt.params;
  const int T = d.params.horizon;

  // Logistics: zones on a near-square grid plus a few diagonal shortcuts.
  LogisticsNetwork& lg = d.logistics;
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_zones))));
  for (int z = 0; z < n_zones; ++z) lg.zones.push_back(z + 1);
  for (int z = 0; z < n_zones; ++z) {
    const int c = z % cols;
    if (c + 1 < cols && z + 1 < n_zones) lg.edges.emplace_back(z + 1, z + 2);
    if (z + cols < n_zones) lg.edges.emplace_back(z + 1, z + cols + 1);
    if (c + 1 < cols && z + cols + 1 < n_zones && rng.chance(0.2)) lg.edges.emplace_back(z + 1, z + cols + 2);
  }
  const int rows = (n_zones + cols - 1) / cols;
  int depot = 0;
  double best = 1e300;
  for (int z = 0; z < n_zones; ++z) {
    const double dr = z / cols - (rows - 1) / 2.0, dc = z % cols - (cols - 1) / 2.0;
    if (dr * dr + dc * dc < best - 1e-12) {
      best = dr * dr + dc * dc;
      depot = z;
    }
  }
  lg.depot = depot + 1;
  for (int z = 0; z < n_zones; ++z) {
    if (z == depot || rng.chance(opt.charging_fraction)) lg.charging_zones.push_back(z + 1);
    if (z != depot) {
      lg.delivery_zones.push_back(z + 1);
      lg.population[z + 1] = rng.uniform(opt.population_min, opt.population_max);
    }
  }

  // Power grid: random spanning tree plus meshing branches; every bus carries load.
  PowerGrid& pw = d.power;
  for (int b = 0; b < n_buses; ++b) pw.buses.push_back({b + 1, BusKind::Load});
  pw.slack_bus = 1;
  std::set<std::pair<int, int>> linked;
  auto link = [&](int a, int b) {
    if (a == b || !linked.insert({std::min(a, b), std::max(a, b)}).second) return;
    pw.branches.push_back({a + 1, b + 1, rng.uniform(5.0, 15.0)});
  };
  for (int b = 1; b < n_buses; ++b) link(rng.below(b), b);
  for (int k = 0; k < n_buses / 4; ++k) link(rng.below(n_buses), rng.below(n_buses));

  std::vector<double> level(n_buses);
  for (double& l : level) l = opt.load_per_bus * rng.uniform(0.5, 1.5);
  pw.base_load.assign(T, std::vector<double>(n_buses));
  double peak = 0.0;
  for (int t = 0; t < T; ++t) {
    double total = 0.0;
    for (int b = 0; b < n_buses; ++b) {
      pw.base_load[t][b] = level[b] * base_load_shape(t, T);
      total += pw.base_load[t][b];
    }
    peak = std::max(peak, total);
  }

  const int n_gen = (6 * n_buses + 4) / 5;
  for (int k = 0; k < n_gen; ++k) {
    Generator g;
    g.bus = k == 0 ? 1 : rng.below(n_buses) + 1;
    const bool wood = k == 0 || rng.chance(0.5);
    g.c2 = (wood ? kWoodC2 : kDieselC2) * rng.uniform(0.75, 1.25);
    g.c1 = (wood ? kWoodC1 : kDieselC1) * (1.0 + opt.cost_spread * rng.uniform(-1.0, 1.0));
    g.p_min = 0.0;
    g.p_max = opt.capacity_margin * peak / n_gen * rng.uniform(0.8, 1.2);
    pw.generators.push_back(g);
  }

  // Line limits from a proportional-dispatch DC flow at peak load, with headroom.
  Matrix Z = Matrix::Zero(n_buses, n_buses);
  for (const Branch& br : pw.branches) {
    const int a = br.from - 1, b = br.to - 1;
    Z(a, a) += br.susceptance;
    Z(b, b) += br.susceptance;
    Z(a, b) -= br.susceptance;
    Z(b, a) -= br.susceptance;
  }
  double cap = 0.0;
  for (const Generator& g : pw.generators) cap += g.p_max;
  int t_peak = 0;
  for (int t = 1; t < T; ++t) {
    if (base_load_shape(t, T) > base_load_shape(t_peak, T)) t_peak = t;
  }
  Vector injection = Vector::Zero(n_buses);
  double total_load = 0.0;
  for (int b = 0; b < n_buses; ++b) {
    injection(b) -= pw.base_load[t_peak][b];
    total_load += pw.base_load[t_peak][b];
  }
  for (const Generator& g : pw.generators) injection(g.bus - 1) += g.p_max / cap * total_load;
  Vector theta = Vector::Zero(n_buses);
  theta.tail(n_buses - 1) = Z.bottomRightCorner(n_buses - 1, n_buses - 1).ldlt().solve(injection.tail(n_buses - 1));
  for (Branch& br : pw.branches) {
    const double flow = br.susceptance * (theta(br.from - 1) - theta(br.to - 1));
    const double limit = std::max(std::abs(flow) * rng.uniform(opt.line_headroom_min, opt.line_headroom_max), opt.line_floor * opt.load_per_bus);
    br.flow_min = -limit;
    br.flow_max = limit;
  }

  Coupling& cp = d.coupling;
  for (int id : lg.charging_zones) cp.zone_to_bus[id] = rng.below(n_buses) + 1;
  cp.phi_soc = opt.phi_soc;
  cp.phi_kw = opt.phi_kw;
  cp.energy_base_kw = opt.energy_base_kw;
  return d;
}

/// Generates and validates a synthetic scenario.
inline Scenario synth_scenario(std::uint64_t seed, int n_zones, int n_buses, const SynthOptions& opt = {}) {
  return Scenario(synth_scenario_data(seed, n_zones, n_buses, opt));
}

}  // namespace etruck
