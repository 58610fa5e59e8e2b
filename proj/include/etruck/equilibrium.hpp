#pragma once

// Outer price fixed point p_C = h(p_C): for a price field the fleet's reward
// fixed point is solved, its charging load is added to the base load, and the
// horizon DC-OPF returns new load-bus LMPs. Anderson acceleration drives p_C.

#include <algorithm>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "etruck/anderson.hpp"
#include "etruck/dcopf.hpp"
#include "etruck/pumdp.hpp"
#include "etruck/reward_design.hpp"
#include "etruck/scenario.hpp"

namespace etruck {

/// Outer-loop preset with the scenario's outer tolerance.
inline AAConfig equilibrium_config(const Scenario& sc) {
  AAConfig c = AAConfig::equilibrium();
  c.tolerance = sc.params().eps_outer;
  c.max_iter = 50;
  return c;
}

struct EquilibriumOptions {
  std::optional<AAConfig> inner;            // defaults to elo_config(scenario)
  std::optional<AAConfig> outer;            // defaults to equilibrium_config(scenario)
  std::optional<PriceField> initial_prices; // defaults to the baseline LMPs
  int workers = 1;
  std::size_t state_cap = StateSpace::kDefaultStateCap;
  OpfOptions opf{};
};

struct EquilibriumResult {
  PriceField baseline_lmp;    // T x load buses, no charging
  double baseline_cost = 0.0;
  PriceField prices;          // p_C*, T x load buses
  PriceField response;        // h(p_C*), the LMPs of the last evaluation
  RewardPair rewards;         // mu* at p_C*
  FlowVector flow;
  PriceField delivery_flow;   // T x delivery zones
  PriceField demand;          // windows x delivery zones
  PriceField delivery_price;  // D^-1(demand)
  PriceField charging_flow;   // truck-steps, T x charging zones
  PriceField charging_load;   // p.u., T x load buses
  OpfHorizon opf;             // at the base plus charging load
  AATrace outer_trace;
  std::vector<AATrace> inner_traces;
  std::vector<std::string> diagnostics;
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
};

/// Raised when the inner or outer loop fails; carries the traces so far.
class EquilibriumError : public Error {
 public:
  EquilibriumError(const std::string& what, AATrace outer, std::vector<AATrace> inner)
      : Error(what), outer_(std::move(outer)), inner_(std::move(inner)) {}
  const AATrace& outer_trace() const noexcept { return outer_; }
  const std::vector<AATrace>& inner_traces() const noexcept { return inner_; }

 private:
  AATrace outer_;
  std::vector<AATrace> inner_;
};

inline OpfHorizon baseline_opf(const Scenario& sc, int workers = 1, const OpfOptions& opt = {}) {
  return solve_opf_horizon(sc, sc.base_load(), workers, opt);
}

inline PriceField baseline_lmp(const Scenario& sc, int workers = 1, const OpfOptions& opt = {}) {
  return baseline_opf(sc, workers, opt).lmp;
}

/// Rejects scenarios whose generation cannot cover the base load plus the
/// whole fleet charging at once at some step.
inline void check_fleet_capacity(const Scenario& sc) {
  double cap = 0.0;
  for (const Generator& g : sc.data().power.generators) cap += g.p_max;
  const double fleet_load = sc.params().fleet * sc.energy_per_step();
  for (int t = 0; t < sc.params().horizon; ++t) {
    const double need = sc.base_load().row(t).sum() + fleet_load;
    if (need > cap) {
      std::ostringstream os;
      os << "base load plus full-fleet charging " << need << " exceeds generation capacity " << cap;
      throw InfeasibleError(t, os.str());
    }
  }
}

inline EquilibriumResult solve_equilibrium(const Scenario& sc, const EquilibriumOptions& options = {}) {
  const AAConfig inner = options.inner ? *options.inner : elo_config(sc);
  const AAConfig outer = options.outer ? *options.outer : equilibrium_config(sc);
  inner.validate();
  outer.validate();
  check_fleet_capacity(sc);

  const int T = sc.params().horizon, nl = sc.num_load_buses();
  EquilibriumResult res;
  {
    const OpfHorizon base = baseline_opf(sc, options.workers, options.opf);
    res.baseline_lmp = base.lmp;
    res.baseline_cost = base.total_cost;
  }
  const PriceField start = options.initial_prices ? *options.initial_prices : res.baseline_lmp;
  if (start.rows() != T || start.cols() != nl) throw ContractError("initial prices must be T x load buses");

  const StateSpace space(sc, options.state_cap);
  res.num_states = space.num_states();
  res.num_actions = space.num_actions();

  const double price_cap = 10.0 * max_marginal_cost(sc);
  bool left_box = false;
  std::optional<PriceField> warm;
  RewardSolution last_inner;
  OpfHorizon last_opf;
  PriceField last_load;
  Vector last_point;
  AATrace partial_outer;

  auto h = [&](const Vector& p) -> Vector {
    const PriceField prices = unflatten(p, T, nl);
    if (!left_box && (prices.minCoeff() < 0.0 || prices.maxCoeff() > price_cap)) {
      left_box = true;
      std::ostringstream os;
      os << "outer iterate " << res.inner_traces.size() << " left the price box [0, " << price_cap << "]";
      res.diagnostics.push_back(os.str());
    }
    try {
      last_inner = solve_reward_fixed_point(space, sc, prices, inner, warm, options.workers);
    } catch (const FixedPointError& e) {
      res.inner_traces.push_back(e.trace());
      throw EquilibriumError("reward fixed point failed at outer iteration " +
                                 std::to_string(res.inner_traces.size() - 1) + ": " + e.what(),
                             partial_outer, res.inner_traces);
    }
    res.inner_traces.push_back(last_inner.trace);
    warm = last_inner.rewards.delivery;
    last_load = charging_load(sc, charging_flows(space, last_inner.response.flow));
    const PriceField total = sc.base_load() + last_load;
    try {
      last_opf = solve_opf_horizon(sc, total, options.workers, options.opf);
    } catch (const InfeasibleError& e) {
      throw EquilibriumError(std::string(e.what()) + " (outer iteration " +
                                 std::to_string(res.inner_traces.size() - 1) + ")",
                             partial_outer, res.inner_traces);
    }
    last_point = p;
    const Vector out = flatten(last_opf.lmp);
    partial_outer.steps.push_back({static_cast<int>(partial_outer.steps.size()), (p - out).norm(),
                                   AAStepKind::Initial, 0});
    return out;
  };

  AAResult sol;
  try {
    sol = aa_solve(h, flatten(start), outer);
  } catch (const FixedPointError& e) {
    throw EquilibriumError(std::string("price fixed point: ") + e.what(), e.trace(), res.inner_traces);
  }
  if (last_point != sol.x) h(sol.x);

  res.prices = unflatten(sol.x, T, nl);
  res.response = last_opf.lmp;
  res.outer_trace = std::move(sol.trace);
  res.rewards = last_inner.rewards;
  res.flow = std::move(last_inner.response.flow);
  res.delivery_flow = last_inner.response.delivery;
  res.demand = last_inner.response.demand;
  res.delivery_price = DemandModel::from(sc).inverse(res.demand);
  res.charging_flow = charging_flows(space, res.flow);
  res.charging_load = last_load;
  res.opf = std::move(last_opf);
  if (res.delivery_price.size() > 0 && res.delivery_price.minCoeff() < 0.0) {
    std::ostringstream os;
    os << "equilibrium delivery price below zero (min " << res.delivery_price.minCoeff() << ")";
    res.diagnostics.push_back(os.str());
  }
  return res;
}

}  // namespace etruck
