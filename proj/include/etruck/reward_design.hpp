#pragma once

// Reward design of the logistics operator. Delivery rewards are set to the
// marginal revenue of the window demand they induce,
//
//   mu_D = N^T [ dD^-1(z) z + D^-1(z) ],   z = N x_D(mu),
//
// and charging rewards pass electricity prices through: mu_C = -e M^T p_C with
// e the per-unit load of one truck-step of charging. mu_D is carried at window
// resolution (windows x delivery zones); N^T only replicates it over steps.

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "etruck/anderson.hpp"
#include "etruck/error.hpp"
#include "etruck/pumdp.hpp"
#include "etruck/scenario.hpp"
#include "etruck/types.hpp"

namespace etruck {

/// Inverse demand D^-1(z) = a - b exp(z / zeta_v) per (window, delivery zone).
struct DemandModel {
  double a = 10.0;
  double b = 5.0;
  Vector zeta;      // per delivery column
  int windows = 4;

  static DemandModel from(const Scenario& sc) {
    DemandModel m;
    m.a = sc.params().demand_a;
    m.b = sc.params().demand_b;
    m.windows = sc.params().windows;
    m.zeta.resize(sc.num_delivery_zones());
    for (int j = 0; j < sc.num_delivery_zones(); ++j) m.zeta(j) = sc.population(j);
    return m;
  }

  void check(const PriceField& z) const {
    if (z.cols() != zeta.size()) throw ContractError("demand has the wrong number of zone columns");
  }

  PriceField inverse(const PriceField& z) const {
    check(z);
    PriceField p(z.rows(), z.cols());
    for (Eigen::Index k = 0; k < z.rows(); ++k)
      for (Eigen::Index j = 0; j < z.cols(); ++j) p(k, j) = a - b * std::exp(z(k, j) / zeta(j));
    return p;
  }

  /// Diagonal of the Jacobian of D^-1: -(b / zeta) exp(z / zeta).
  PriceField slope(const PriceField& z) const {
    check(z);
    PriceField d(z.rows(), z.cols());
    for (Eigen::Index k = 0; k < z.rows(); ++k)
      for (Eigen::Index j = 0; j < z.cols(); ++j) d(k, j) = -(b / zeta(j)) * std::exp(z(k, j) / zeta(j));
    return d;
  }

  /// Diagonal of the second derivative of D^-1.
  PriceField curvature(const PriceField& z) const {
    PriceField d = slope(z);
    for (Eigen::Index k = 0; k < z.rows(); ++k)
      for (Eigen::Index j = 0; j < z.cols(); ++j) d(k, j) /= zeta(j);
    return d;
  }

  /// dD^-1(z) z + D^-1(z).
  PriceField marginal_revenue(const PriceField& z) const {
    return inverse(z) + slope(z).cwiseProduct(z);
  }

  /// Second derivative of the revenue z D^-1(z); nonpositive means concave.
  PriceField revenue_curvature(const PriceField& z) const {
    return curvature(z).cwiseProduct(z) + 2.0 * slope(z);
  }

  /// Demand at price p, the inverse of D^-1 (requires p < a).
  PriceField demand(const PriceField& p) const {
    check(p);
    PriceField z(p.rows(), p.cols());
    for (Eigen::Index k = 0; k < p.rows(); ++k)
      for (Eigen::Index j = 0; j < p.cols(); ++j) z(k, j) = zeta(j) * std::log((a - p(k, j)) / b);
    return z;
  }
};

struct RewardPair {
  PriceField delivery;  // windows x delivery zones
  PriceField charging;  // T x charging zones
};

/// mu_C = -e M^T p_C for a T x load-bus price field.
inline PriceField charging_rewards(const Scenario& sc, const PriceField& prices) {
  if (prices.rows() != sc.params().horizon || prices.cols() != sc.num_load_buses())
    throw ContractError("electricity prices must be T x load buses");
  const double e = sc.energy_per_step();
  PriceField mu(prices.rows(), sc.num_charging_zones());
  for (Eigen::Index t = 0; t < prices.rows(); ++t)
    for (int c = 0; c < sc.num_charging_zones(); ++c) mu(t, c) = -e * prices(t, sc.charging_load_slot(c));
  return mu;
}

/// Delivery rewards at zero demand, N^T D^-1(0).
inline PriceField initial_delivery_rewards(const Scenario& sc) {
  return PriceField::Constant(sc.params().windows, sc.num_delivery_zones(), sc.params().demand_a - sc.params().demand_b);
}

/// Fleet response to a reward pair.
struct FleetResponse {
  ValueTable values;
  FlowVector flow;
  PriceField delivery;  // x_D, T x delivery zones
  PriceField demand;    // z = N x_D, windows x delivery zones
};

inline FleetResponse evaluate_rewards(const StateSpace& space, const Scenario& sc, const RewardPair& mu,
                                      int workers = 1) {
  if (mu.delivery.rows() != sc.params().windows || mu.delivery.cols() != sc.num_delivery_zones())
    throw ContractError("delivery rewards must be windows x delivery zones");
  FleetResponse r;
  const auto u = assemble_rewards(space, expand_windows(sc, mu.delivery), mu.charging, sc.params().teleport_penalty);
  r.values = solve_values(space, u, workers);
  r.flow = propagate_flows(space, r.values, sc.params().fleet);
  r.delivery = delivery_flows(space, r.flow);
  r.demand = window_demand(sc, r.delivery);
  return r;
}

/// Right-hand side of the reward fixed point at (mu, p_C).
inline RewardPair elo_reward_map(const StateSpace& space, const Scenario& sc, const RewardPair& mu,
                                 const PriceField& prices, int workers = 1) {
  const FleetResponse r = evaluate_rewards(space, sc, mu, workers);
  return {DemandModel::from(sc).marginal_revenue(r.demand), charging_rewards(sc, prices)};
}

/// Reward-design preset with the scenario's inner tolerance.
inline AAConfig elo_config(const Scenario& sc) {
  AAConfig c = AAConfig::elo();
  c.tolerance = sc.params().eps_inner;
  return c;
}

struct RewardSolution {
  RewardPair rewards;
  FleetResponse response;  // at rewards
  AATrace trace;
};

/// Solves mu_D = marginal revenue(N x_D(mu_D, mu_C)) for fixed prices. The
/// residual is measured on the windows x zones delivery rewards.
inline RewardSolution solve_reward_fixed_point(const StateSpace& space, const Scenario& sc, const PriceField& prices,
                                               const AAConfig& config,
                                               const std::optional<PriceField>& initial = std::nullopt,
                                               int workers = 1) {
  const int K = sc.params().windows, nd = sc.num_delivery_zones();
  const DemandModel model = DemandModel::from(sc);
  RewardPair mu{initial ? *initial : initial_delivery_rewards(sc), charging_rewards(sc, prices)};
  if (mu.delivery.rows() != K || mu.delivery.cols() != nd)
    throw ContractError("initial delivery rewards must be windows x delivery zones");

  FleetResponse last;
  Vector last_point;
  auto map = [&](const Vector& w) -> Vector {
    mu.delivery = unflatten(w, K, nd);
    last = evaluate_rewards(space, sc, mu, workers);
    last_point = w;
    return flatten(model.marginal_revenue(last.demand));
  };
  AAResult res = aa_solve(map, flatten(mu.delivery), config);
  if (last_point != res.x) map(res.x);
  RewardSolution out;
  out.rewards = {unflatten(res.x, K, nd), mu.charging};
  out.response = std::move(last);
  out.trace = std::move(res.trace);
  return out;
}

/// Profit p_D^T z - p_C^T (e M x_C) - rho 1^T x_L - H(x), with p_D = D^-1(N x_D).
inline double elo_profit(const StateSpace& space, const Scenario& sc, const FlowVector& flow, const PriceField& prices) {
  const PriceField z = window_demand(sc, delivery_flows(space, flow));
  const PriceField pd = DemandModel::from(sc).inverse(z);
  const PriceField load = charging_load(sc, charging_flows(space, flow));
  if (prices.rows() != load.rows() || prices.cols() != load.cols())
    throw ContractError("electricity prices must be T x load buses");
  return pd.cwiseProduct(z).sum() - prices.cwiseProduct(load).sum() -
         sc.params().teleport_penalty * teleport_flow(space, flow) - flow_perturbation(space, flow.x);
}

}  // namespace etruck
