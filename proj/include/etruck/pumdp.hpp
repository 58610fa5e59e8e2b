#pragma once

// Finite-horizon perturbed-utility MDP of a single e-truck, its entropy-
// perturbed Bellman solution, and the fleet flows it induces.
//
// State (t, zone, soc, deliveries left, charging steps left). Transitions are
// deterministic. With the perturbation F(pi) = pi^T (ln pi - 1) the per-state
// maximisation has the closed form V = logsumexp(Q) + 1, pi = softmax(Q).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "etruck/error.hpp"
#include "etruck/parallel.hpp"
#include "etruck/scenario.hpp"
#include "etruck/types.hpp"

namespace etruck {

struct TruckState {
  int t = 0;
  int zone = 0;        // zone index
  int soc = 0;         // r
  int deliveries = 0;  // n, deliveries left in the current shift
  int charging = 0;    // tau, charging steps left

  bool operator==(const TruckState&) const = default;
};

enum class ActionKind : std::uint8_t { Idle, Deliver, Charge, Move, Teleport };

struct TruckAction {
  ActionKind kind = ActionKind::Idle;
  int arg = 0;  // Move: target zone index; Charge: SOC gained (delta_r)

  bool operator==(const TruckAction&) const = default;
};

inline const char* to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::Idle: return "idle";
    case ActionKind::Deliver: return "deliver";
    case ActionKind::Charge: return "charge";
    case ActionKind::Move: return "move";
    case ActionKind::Teleport: return "teleport";
  }
  return "?";
}

inline TruckState initial_state(const Scenario& sc) {
  return {0, sc.depot(), sc.params().r_max, sc.params().n_max, 0};
}

/// True for the move that ends a shift at the depot (resets deliveries).
inline bool returns_to_depot(const Scenario& sc, const TruckAction& a) {
  return a.kind == ActionKind::Move && a.arg == sc.depot();
}

namespace detail {

template <class Emit>
void for_each_feasible_action(const Scenario& sc, const TruckState& s, Emit&& emit) {
  const Params& p = sc.params();
  const int T = p.horizon;
  if (s.t >= T) return;
  if (s.charging > 0) {
    emit(TruckAction{ActionKind::Idle, 0});
    return;
  }
  if (s.t == T - 1) {
    if (s.zone == sc.depot() && s.soc == p.r_max) emit(TruckAction{ActionKind::Idle, 0});
    else emit(TruckAction{ActionKind::Teleport, 0});
    return;
  }
  const bool can_charge = sc.is_charging(s.zone);
  auto charges = [&] {
    const int phi = sc.data().coupling.phi_soc;
    for (int steps = 1; s.t + steps <= T - 1 && s.soc + phi * steps <= p.r_max; ++steps)
      emit(TruckAction{ActionKind::Charge, phi * steps});
  };
  auto moves = [&] {
    for (int w : sc.neighbors(s.zone)) emit(TruckAction{ActionKind::Move, w});
  };

  emit(TruckAction{ActionKind::Idle, 0});
  if (s.soc == 0) {
    if (can_charge) charges();
    return;
  }
  if (s.deliveries > 0 && sc.is_delivery(s.zone)) emit(TruckAction{ActionKind::Deliver, 0});
  if (can_charge) charges();
  moves();
}

inline TruckState apply(const Scenario& sc, const TruckState& s, const TruckAction& a) {
  const Params& p = sc.params();
  switch (a.kind) {
    case ActionKind::Idle:
      return {s.t + 1, s.zone, s.soc, s.deliveries, s.charging > 0 ? s.charging - 1 : 0};
    case ActionKind::Deliver:
      return {s.t + 1, s.zone, s.soc - 1, s.deliveries - 1, s.charging};
    case ActionKind::Charge: {
      const int steps = a.arg / sc.data().coupling.phi_soc;
      return {s.t + 1, s.zone, s.soc + a.arg, s.deliveries, steps - 1};
    }
    case ActionKind::Move:
      return {s.t + 1, a.arg, s.soc - 1, a.arg == sc.depot() ? p.n_max : s.deliveries, s.charging};
    case ActionKind::Teleport:
      return {s.t + 1, sc.depot(), p.r_max, p.n_max, 0};
  }
  throw ContractError("unknown action kind");
}

}  // namespace detail

/// Feasible actions of a state in canonical order: idle, deliver, charges by
/// increasing amount, moves by zone index, teleport.
inline std::vector<TruckAction> feasible_actions(const Scenario& sc, const TruckState& s) {
  std::vector<TruckAction> out;
  detail::for_each_feasible_action(sc, s, [&](const TruckAction& a) { out.push_back(a); });
  return out;
}

/// Successor state; throws ContractError if the action is not feasible in s.
inline TruckState transition(const Scenario& sc, const TruckState& s, const TruckAction& a) {
  const auto actions = feasible_actions(sc, s);
  if (std::find(actions.begin(), actions.end(), a) == actions.end()) {
    throw ContractError(std::string("action ") + to_string(a.kind) + "(" + std::to_string(a.arg) +
                        ") is not feasible at t=" + std::to_string(s.t) + ", zone=" + std::to_string(s.zone) +
                        ", soc=" + std::to_string(s.soc) + ", n=" + std::to_string(s.deliveries) +
                        ", tau=" + std::to_string(s.charging));
  }
  return detail::apply(sc, s, a);
}

/// All states reachable from the initial state, grouped by time layer, with
/// their feasible actions stored contiguously.
class StateSpace {
 public:
  static constexpr std::size_t kDefaultStateCap = 20'000'000;

  explicit StateSpace(const Scenario& sc, std::size_t state_cap = kDefaultStateCap)
      : horizon_(sc.params().horizon),
        delivery_cols_(sc.num_delivery_zones()),
        charging_cols_(sc.num_charging_zones()) {
    const int T = horizon_;
    layer_begin_.assign(T + 2, 0);
    auto add = [&](const TruckState& s) -> std::uint32_t {
      const std::uint64_t k = key(s);
      auto [it, inserted] = index_.try_emplace(k, static_cast<std::uint32_t>(states_.size()));
      if (inserted) {
        if (states_.size() >= state_cap)
          throw ResourceError("state space exceeds the cap of " + std::to_string(state_cap) + " states");
        states_.push_back(s);
      }
      return it->second;
    };

    add(initial_state(sc));
    // States of layer t + 1 are only created while expanding layer t, so each
    // layer is the contiguous range appended during the previous pass.
    for (int t = 0; t <= T; ++t) {
      const std::size_t end = states_.size();
      layer_begin_[t + 1] = end;
      for (std::size_t i = layer_begin_[t]; i < end; ++i) {
        action_begin_.push_back(actions_.size());
        const TruckState s = states_[i];
        detail::for_each_feasible_action(sc, s, [&](const TruckAction& a) {
          const TruckState next = detail::apply(sc, s, a);
          actions_.push_back(a);
          source_.push_back(static_cast<std::uint32_t>(i));
          int column = -1;
          if (a.kind == ActionKind::Deliver) {
            column = s.t * delivery_cols_ + sc.delivery_slot(s.zone);
          } else if (a.kind == ActionKind::Charge || (a.kind == ActionKind::Idle && s.charging > 0)) {
            column = s.t * charging_cols_ + sc.charging_slot(s.zone);
          }
          column_.push_back(column);
          next_.push_back(add(next));
        });
      }
    }
    action_begin_.push_back(actions_.size());
  }

  int horizon() const noexcept { return horizon_; }
  std::size_t num_states() const noexcept { return states_.size(); }
  std::size_t num_actions() const noexcept { return actions_.size(); }
  int delivery_columns() const noexcept { return delivery_cols_; }
  int charging_columns() const noexcept { return charging_cols_; }

  const TruckState& state(std::size_t i) const { return states_[i]; }
  std::size_t layer_begin(int t) const { return layer_begin_.at(t); }
  std::size_t layer_end(int t) const { return layer_begin_.at(t + 1); }
  std::size_t actions_begin(std::size_t s) const { return action_begin_[s]; }
  std::size_t actions_end(std::size_t s) const { return action_begin_[s + 1]; }

  const TruckAction& action(std::size_t k) const { return actions_[k]; }
  std::uint32_t next(std::size_t k) const { return next_[k]; }
  std::uint32_t source(std::size_t k) const { return source_[k]; }
  /// For deliveries: t * delivery_columns + delivery slot. For charging-occupied
  /// actions (start of a charge, or idle while charging): t * charging_columns
  /// + charging slot. Otherwise -1.
  int reward_column(std::size_t k) const { return column_[k]; }
  bool draws_energy(std::size_t k) const {
    return actions_[k].kind == ActionKind::Charge ||
           (actions_[k].kind == ActionKind::Idle && states_[source_[k]].charging > 0);
  }

  std::optional<std::size_t> find(const TruckState& s) const {
    if (s.t < 0 || s.t > horizon_ || s.zone < 0 || s.soc < 0 || s.deliveries < 0 || s.charging < 0) return std::nullopt;
    auto it = index_.find(key(s));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  static std::uint64_t key(const TruckState& s) {
    return (static_cast<std::uint64_t>(s.t) << 48) | (static_cast<std::uint64_t>(s.zone) << 32) |
           (static_cast<std::uint64_t>(s.soc) << 20) | (static_cast<std::uint64_t>(s.deliveries) << 10) |
           static_cast<std::uint64_t>(s.charging);
  }

  int horizon_;
  int delivery_cols_;
  int charging_cols_;
  std::vector<TruckState> states_;
  std::vector<std::size_t> layer_begin_;
  std::vector<std::size_t> action_begin_;
  std::vector<TruckAction> actions_;
  std::vector<std::uint32_t> next_;
  std::vector<std::uint32_t> source_;
  std::vector<int> column_;
  std::unordered_map<std::uint64_t, std::uint32_t> index_;
};

/// Per-action reward vector u(s, a).
///
/// delivery: T x |delivery zones| reward of a delivery made at (t, zone).
/// charging: T x |charging zones| reward of one occupied charging step at
///           (t, zone); a charge started at t is credited charging(t, .) and
///           each in-charging idle step at t' is credited charging(t', .).
inline std::vector<double> assemble_rewards(const StateSpace& space, const PriceField& delivery,
                                            const PriceField& charging, double teleport_penalty) {
  const int T = space.horizon();
  if (delivery.rows() != T || delivery.cols() != space.delivery_columns())
    throw ContractError("delivery rewards must be " + std::to_string(T) + " x " +
                        std::to_string(space.delivery_columns()));
  if (charging.rows() != T || charging.cols() != space.charging_columns())
    throw ContractError("charging rewards must be " + std::to_string(T) + " x " +
                        std::to_string(space.charging_columns()));
  std::vector<double> u(space.num_actions(), 0.0);
  for (std::size_t k = 0; k < u.size(); ++k) {
    const TruckAction& a = space.action(k);
    const int col = space.reward_column(k);
    if (a.kind == ActionKind::Deliver) u[k] = delivery.data()[col];
    else if (col >= 0) u[k] = charging.data()[col];
    else if (a.kind == ActionKind::Teleport) u[k] = -teleport_penalty;
  }
  return u;
}

struct ValueTable {
  std::vector<double> value;   // V per state
  std::vector<double> q;       // Q per action
  std::vector<double> policy;  // pi per action
};

/// Backward soft value iteration; terminal values are zero.
inline ValueTable solve_values(const StateSpace& space, std::span<const double> rewards, int workers = 1) {
  if (rewards.size() != space.num_actions()) throw ContractError("reward vector does not match the action count");
  ValueTable out;
  out.value.assign(space.num_states(), 0.0);
  out.q.assign(space.num_actions(), 0.0);
  out.policy.assign(space.num_actions(), 0.0);
  for (int t = space.horizon() - 1; t >= 0; --t) {
    parallel_for(space.layer_begin(t), space.layer_end(t), workers, [&](std::size_t s) {
      const std::size_t a0 = space.actions_begin(s), a1 = space.actions_end(s);
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t k = a0; k < a1; ++k) {
        out.q[k] = rewards[k] + out.value[space.next(k)];
        top = std::max(top, out.q[k]);
      }
      double sum = 0.0;
      for (std::size_t k = a0; k < a1; ++k) {
        out.policy[k] = std::exp(out.q[k] - top);
        sum += out.policy[k];
      }
      for (std::size_t k = a0; k < a1; ++k) out.policy[k] /= sum;
      out.value[s] = top + std::log(sum) + 1.0;
    });
  }
  return out;
}

struct FlowVector {
  std::vector<double> occupancy;  // trucks in each state
  std::vector<double> x;          // trucks taking each action
};

/// Forward propagation of the fleet from the initial state under the policy.
inline FlowVector propagate_flows(const StateSpace& space, const ValueTable& values, double fleet) {
  FlowVector f;
  f.occupancy.assign(space.num_states(), 0.0);
  f.x.assign(space.num_actions(), 0.0);
  if (space.num_states() == 0) return f;
  f.occupancy[0] = fleet;
  for (int t = 0; t < space.horizon(); ++t) {
    for (std::size_t s = space.layer_begin(t); s < space.layer_end(t); ++s) {
      const double occ = f.occupancy[s];
      for (std::size_t k = space.actions_begin(s); k < space.actions_end(s); ++k) {
        f.x[k] = occ * values.policy[k];
        f.occupancy[space.next(k)] += f.x[k];
      }
    }
  }
  return f;
}

/// Delivery action flows aggregated by (t, delivery zone).
inline PriceField delivery_flows(const StateSpace& space, const FlowVector& flow) {
  PriceField out = PriceField::Zero(space.horizon(), space.delivery_columns());
  for (std::size_t k = 0; k < space.num_actions(); ++k) {
    if (space.action(k).kind == ActionKind::Deliver) out.data()[space.reward_column(k)] += flow.x[k];
  }
  return out;
}

/// Trucks drawing energy, by (t, charging zone).
inline PriceField charging_flows(const StateSpace& space, const FlowVector& flow) {
  PriceField out = PriceField::Zero(space.horizon(), space.charging_columns());
  for (std::size_t k = 0; k < space.num_actions(); ++k) {
    if (space.action(k).kind != ActionKind::Deliver && space.reward_column(k) >= 0)
      out.data()[space.reward_column(k)] += flow.x[k];
  }
  return out;
}

/// Total teleport flow.
inline double teleport_flow(const StateSpace& space, const FlowVector& flow) {
  double total = 0.0;
  for (std::size_t k = 0; k < space.num_actions(); ++k) {
    if (space.action(k).kind == ActionKind::Teleport) total += flow.x[k];
  }
  return total;
}

/// Per-unit charging load by (t, load bus): energy_per_step * M x_C.
inline PriceField charging_load(const Scenario& sc, const PriceField& charging) {
  if (charging.cols() != sc.num_charging_zones()) throw ContractError("charging flows have the wrong column count");
  PriceField load = PriceField::Zero(charging.rows(), sc.num_load_buses());
  const double e = sc.energy_per_step();
  for (Eigen::Index t = 0; t < charging.rows(); ++t) {
    for (int c = 0; c < sc.num_charging_zones(); ++c) load(t, sc.charging_load_slot(c)) += e * charging(t, c);
  }
  return load;
}

/// Demand per (window, delivery zone): N x_D.
inline PriceField window_demand(const Scenario& sc, const PriceField& delivery) {
  PriceField z = PriceField::Zero(sc.params().windows, delivery.cols());
  for (Eigen::Index t = 0; t < delivery.rows(); ++t) z.row(sc.window_of(static_cast<int>(t))) += delivery.row(t);
  return z;
}

/// Window-level values replicated to every time step: N^T w.
inline PriceField expand_windows(const Scenario& sc, const PriceField& per_window) {
  const int T = sc.params().horizon;
  PriceField out(T, per_window.cols());
  for (int t = 0; t < T; ++t) out.row(t) = per_window.row(sc.window_of(t));
  return out;
}

/// Flow perturbation H(x) = sum_s X_s F(x_s / X_s) with F(pi) = pi^T (ln pi - 1)
/// and 0 ln 0 = 0.
inline double flow_perturbation(const StateSpace& space, std::span<const double> x) {
  double h = 0.0;
  for (std::size_t s = 0; s < space.num_states(); ++s) {
    const std::size_t a0 = space.actions_begin(s), a1 = space.actions_end(s);
    double total = 0.0;
    for (std::size_t k = a0; k < a1; ++k) total += x[k];
    if (total <= 0.0) continue;
    for (std::size_t k = a0; k < a1; ++k) {
      if (x[k] > 0.0) h += x[k] * std::log(x[k] / total);
    }
    h -= total;
  }
  return h;
}

/// Max-norm violation of (Lambda - P) x = q: outflow minus inflow at every
/// non-terminal state, with the fleet injected at the initial state.
inline double conservation_residual(const StateSpace& space, std::span<const double> x, double fleet) {
  std::vector<double> balance(space.num_states(), 0.0);
  if (!balance.empty()) balance[0] = -fleet;
  for (std::size_t k = 0; k < space.num_actions(); ++k) {
    balance[space.source(k)] += x[k];
    balance[space.next(k)] -= x[k];
  }
  double worst = 0.0;
  const std::size_t interior = space.layer_begin(space.horizon());
  for (std::size_t s = 0; s < interior; ++s) worst = std::max(worst, std::abs(balance[s]));
  return worst;
}

}  // namespace etruck
