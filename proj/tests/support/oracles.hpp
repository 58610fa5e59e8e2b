#pragma once

// Independent reference computations. None of these call the solver paths
// they are used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "etruck/dcopf.hpp"
#include "etruck/pumdp.hpp"
#include "etruck/scenario.hpp"

namespace oracles {

using namespace etruck;

// ---------------------------------------------------------------------------
// Truck rules written directly from the case analysis: in-charging, last
// step, empty battery, no deliveries left, and the four r>0, n>0 sub-cases.

using StateKey = std::tuple<int, int, int, int, int>;
using ActionKey = std::pair<int, int>;  // (kind, arg)

inline StateKey key_of(const TruckState& s) { return {s.t, s.zone, s.soc, s.deliveries, s.charging}; }

inline std::vector<ActionKey> rule_actions(const Scenario& sc, const StateKey& s) {
  const auto [t, v, r, n, tau] = s;
  const Params& p = sc.params();
  const int T = p.horizon, O = sc.depot(), phi = sc.data().coupling.phi_soc;
  const int I = int(ActionKind::Idle), D = int(ActionKind::Deliver), C = int(ActionKind::Charge),
            M = int(ActionKind::Move), L = int(ActionKind::Teleport);
  std::vector<ActionKey> out;
  auto charge_set = [&] {
    for (int dtau = 1; t + dtau <= T - 1; ++dtau) {
      if (r + phi * dtau <= p.r_max) out.push_back({C, phi * dtau});
    }
  };
  auto move_set = [&] {
    for (int w : sc.neighbors(v)) out.push_back({M, w});
  };
  const bool rc = sc.is_charging(v), rd = sc.is_delivery(v);
  if (tau != 0) return {{I, 0}};
  if (t == T - 1) return (v == O && r == p.r_max) ? std::vector<ActionKey>{{I, 0}} : std::vector<ActionKey>{{L, 0}};
  if (r == 0) {
    out.push_back({I, 0});
    if (rc) charge_set();
    return out;
  }
  if (n == 0) {
    out.push_back({I, 0});
    if (rc) charge_set();
    move_set();
    return out;
  }
  out.push_back({I, 0});
  if (rd && rc) {
    out.push_back({D, 0});
    charge_set();
  } else if (rd) {
    out.push_back({D, 0});
  } else if (rc) {
    charge_set();
  }
  move_set();
  return out;
}

inline StateKey rule_next(const Scenario& sc, const StateKey& s, const ActionKey& a) {
  const auto [t, v, r, n, tau] = s;
  const Params& p = sc.params();
  const int phi = sc.data().coupling.phi_soc;
  switch (ActionKind(a.first)) {
    case ActionKind::Idle: return {t + 1, v, r, n, std::max(tau - 1, 0)};
    case ActionKind::Deliver: return {t + 1, v, r - 1, n - 1, tau};
    case ActionKind::Charge: return {t + 1, v, r + a.second, n, a.second / phi - 1};
    case ActionKind::Move: return {t + 1, a.second, r - 1, a.second == sc.depot() ? p.n_max : n, tau};
    case ActionKind::Teleport: return {t + 1, sc.depot(), p.r_max, p.n_max, 0};
  }
  return s;
}

/// Breadth-first enumeration of reachable states with their action sets.
inline std::map<StateKey, std::multiset<ActionKey>> reachable(const Scenario& sc) {
  std::map<StateKey, std::multiset<ActionKey>> seen;
  const StateKey s0{0, sc.depot(), sc.params().r_max, sc.params().n_max, 0};
  std::queue<StateKey> frontier;
  frontier.push(s0);
  seen[s0];
  while (!frontier.empty()) {
    const StateKey s = frontier.front();
    frontier.pop();
    if (std::get<0>(s) >= sc.params().horizon) continue;
    for (const ActionKey& a : rule_actions(sc, s)) {
      seen[s].insert(a);
      const StateKey nx = rule_next(sc, s, a);
      if (!seen.contains(nx)) {
        seen[nx];
        frontier.push(nx);
      }
    }
  }
  return seen;
}

// ---------------------------------------------------------------------------
// Per-state maximization of sum_a pi_a Q_a - F(pi) over the simplex with
// F(pi) = sum pi (ln pi - 1), by equality-constrained Newton with a
// positivity-preserving backtracking line search. Returns the optimal value.

inline double simplex_max(const std::vector<double>& Q, std::vector<double>* argmax = nullptr) {
  const std::size_t m = Q.size();
  auto objective = [&](const Eigen::VectorXd& pi) {
    double f = 0.0;
    for (std::size_t a = 0; a < m; ++a) f += pi(a) * Q[a] - pi(a) * (std::log(pi(a)) - 1.0);
    return f;
  };
  Eigen::VectorXd pi = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(m), 1.0 / static_cast<double>(m));
  if (m > 1) {
    for (int iter = 0; iter < 500; ++iter) {
      Eigen::VectorXd grad(m), hinv(m);
      for (std::size_t a = 0; a < m; ++a) {
        grad(a) = Q[a] - std::log(pi(a));
        hinv(a) = pi(a);  // inverse of the negated Hessian diag(1/pi)
      }
      // Newton step for max f s.t. 1'pi = 1: d = Hinv (grad - nu 1), 1'd = 0.
      const double nu = hinv.dot(grad) / hinv.sum();
      Eigen::VectorXd d = hinv.cwiseProduct(grad - Eigen::VectorXd::Constant(m, nu));
      const double decrement = d.dot(grad - Eigen::VectorXd::Constant(m, nu));
      if (decrement < 1e-30) break;
      double step = 1.0;
      const double f0 = objective(pi);
      while (step > 1e-20) {
        Eigen::VectorXd trial = pi + step * d;
        if (trial.minCoeff() > 0.0 && objective(trial) >= f0 + 0.25 * step * decrement) {
          pi = trial;
          break;
        }
        step *= 0.5;
      }
      if (step <= 1e-20) break;
    }
  }
  if (argmax) argmax->assign(pi.data(), pi.data() + m);
  return objective(pi);
}

/// Values of every state by backward induction with the simplex oracle.
inline std::vector<double> oracle_values(const StateSpace& space, const std::vector<double>& u) {
  std::vector<double> V(space.num_states(), 0.0);
  for (int t = space.horizon() - 1; t >= 0; --t) {
    for (std::size_t s = space.layer_begin(t); s < space.layer_end(t); ++s) {
      std::vector<double> Q;
      for (std::size_t k = space.actions_begin(s); k < space.actions_end(s); ++k) Q.push_back(u[k] + V[space.next(k)]);
      V[s] = simplex_max(Q);
    }
  }
  return V;
}

// ---------------------------------------------------------------------------
// Flow program max u'x - H(x) s.t. (Lambda - P) x = q, x >= 0, solved by
// projected gradient ascent on the affine set with Barzilai-Borwein steps and
// a nonmonotone backtracking safeguard that keeps x strictly positive.

struct FlowProgram {
  Eigen::MatrixXd A;  // conservation rows of non-terminal states
  Eigen::VectorXd q;
  std::vector<std::size_t> source;
  std::size_t states = 0;
};

inline FlowProgram flow_program(const StateSpace& space, double fleet) {
  FlowProgram fp;
  const std::size_t rows = space.layer_begin(space.horizon());
  const std::size_t cols = space.num_actions();
  fp.A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  fp.q = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows));
  fp.q(0) = fleet;
  fp.states = space.num_states();
  for (std::size_t k = 0; k < cols; ++k) {
    fp.A(static_cast<Eigen::Index>(space.source(k)), static_cast<Eigen::Index>(k)) += 1.0;
    if (space.next(k) < rows) fp.A(static_cast<Eigen::Index>(space.next(k)), static_cast<Eigen::Index>(k)) -= 1.0;
    fp.source.push_back(space.source(k));
  }
  return fp;
}

inline double perturbation(const FlowProgram& fp, const Eigen::VectorXd& x) {
  std::vector<double> total(fp.states, 0.0);
  for (Eigen::Index k = 0; k < x.size(); ++k) total[fp.source[k]] += x(k);
  double h = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (x(k) > 0.0) h += x(k) * std::log(x(k) / total[fp.source[k]]);
  }
  for (double X : total) h -= X;
  return h;
}

inline Eigen::VectorXd perturbation_gradient(const FlowProgram& fp, const Eigen::VectorXd& x) {
  std::vector<double> total(fp.states, 0.0);
  for (Eigen::Index k = 0; k < x.size(); ++k) total[fp.source[k]] += x(k);
  Eigen::VectorXd g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) g(k) = std::log(x(k) / total[fp.source[k]]) - 1.0;
  return g;
}

struct FlowOptimum {
  Eigen::VectorXd x;
  double objective = 0.0;
  int iterations = 0;
};

inline FlowOptimum projected_gradient(const StateSpace& space, const std::vector<double>& u, double fleet,
                                      int max_iter = 200000, double tol = 1e-12) {
  const FlowProgram fp = flow_program(space, fleet);
  const Eigen::Index n = fp.A.cols();
  const Eigen::LDLT<Eigen::MatrixXd> normal(fp.A * fp.A.transpose());
  auto project = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return v - fp.A.transpose() * normal.solve(fp.A * v);
  };
  const Eigen::Map<const Eigen::VectorXd> uu(u.data(), n);
  auto objective = [&](const Eigen::VectorXd& x) { return uu.dot(x) - perturbation(fp, x); };

  // Feasible interior start: the uniform-policy flow.
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  {
    std::vector<double> occ(space.num_states(), 0.0);
    occ[0] = fleet;
    for (std::size_t s = 0; s < space.layer_begin(space.horizon()); ++s) {
      const double share = occ[s] / static_cast<double>(space.actions_end(s) - space.actions_begin(s));
      for (std::size_t k = space.actions_begin(s); k < space.actions_end(s); ++k) {
        x(static_cast<Eigen::Index>(k)) = share;
        occ[space.next(k)] += share;
      }
    }
  }

  FlowOptimum out;
  Eigen::VectorXd g = project(uu - perturbation_gradient(fp, x));
  double step = 1e-2;
  std::vector<double> history{objective(x)};
  for (int it = 0; it < max_iter; ++it) {
    out.iterations = it + 1;
    if (g.norm() <= tol) break;
    const double reference = *std::max_element(history.end() - std::min<std::ptrdiff_t>(10, history.size()), history.end());
    double alpha = step;
    Eigen::VectorXd next;
    double f_next = -std::numeric_limits<double>::infinity();
    for (int bt = 0; bt < 200; ++bt) {
      next = x + alpha * g;
      if (next.minCoeff() > 0.0) {
        f_next = objective(next);
        if (f_next >= reference + 1e-4 * alpha * g.squaredNorm()) break;
      }
      alpha *= 0.5;
    }
    if (!(f_next > -std::numeric_limits<double>::infinity())) break;
    const Eigen::VectorXd g_next = project(uu - perturbation_gradient(fp, next));
    const Eigen::VectorXd sx = next - x, sg = g_next - g;
    const double curvature = -sx.dot(sg);
    step = curvature > 0.0 ? std::clamp(sx.squaredNorm() / curvature, 1e-10, 1e10) : 1.0;
    x = next;
    g = g_next;
    history.push_back(f_next);
  }
  out.x = x;
  out.objective = objective(x);
  return out;
}

// ---------------------------------------------------------------------------
// DC-OPF: random feasible instances and an independent KKT residual.

struct Residuals {
  double stationarity = 0.0;
  double balance = 0.0;
  double bounds = 0.0;
  double dual_sign = 0.0;
  double complementarity = 0.0;
  double gap = 0.0;  // primal minus dual objective
};

inline Residuals kkt_residuals(const OpfInstance& inst, const OpfSolution& sol) {
  Residuals r;
  const int n = inst.num_buses;
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(n, n);
  for (const OpfBranch& br : inst.branches) {
    Z(br.from, br.from) += br.susceptance;
    Z(br.to, br.to) += br.susceptance;
    Z(br.from, br.to) -= br.susceptance;
    Z(br.to, br.from) -= br.susceptance;
  }
  Eigen::VectorXd injection = -inst.load;
  double primal = 0.0, dual = sol.lambda.dot(inst.load);
  for (std::size_t k = 0; k < inst.generators.size(); ++k) {
    const OpfGenerator& gen = inst.generators[k];
    const Eigen::Index i = static_cast<Eigen::Index>(k);
    injection(gen.bus) += sol.g(i);
    r.stationarity = std::max(r.stationarity, std::abs(2.0 * gen.c2 * sol.g(i) + gen.c1 - sol.lambda(gen.bus) +
                                                       sol.mu_plus(i) - sol.mu_minus(i)));
    r.bounds = std::max({r.bounds, sol.g(i) - gen.p_max, gen.p_min - sol.g(i)});
    r.dual_sign = std::max({r.dual_sign, -sol.mu_plus(i), -sol.mu_minus(i)});
    r.complementarity = std::max({r.complementarity, std::abs(sol.mu_plus(i) * (gen.p_max - sol.g(i))),
                                  std::abs(sol.mu_minus(i) * (sol.g(i) - gen.p_min))});
    primal += gen.c2 * sol.g(i) * sol.g(i) + gen.c1 * sol.g(i);
    dual += -gen.c2 * sol.g(i) * sol.g(i) - sol.mu_plus(i) * gen.p_max + sol.mu_minus(i) * gen.p_min;
  }
  r.balance = (injection - Z * sol.theta).cwiseAbs().maxCoeff();
  r.balance = std::max(r.balance, std::abs(sol.theta(inst.slack)));
  Eigen::VectorXd angle = Z * sol.lambda;
  angle(inst.slack) += sol.lambda_slack;
  for (std::size_t e = 0; e < inst.branches.size(); ++e) {
    const OpfBranch& br = inst.branches[e];
    const Eigen::Index i = static_cast<Eigen::Index>(e);
    const double f = br.susceptance * (sol.theta(br.from) - sol.theta(br.to));
    angle(br.from) += br.susceptance * (sol.eta_plus(i) - sol.eta_minus(i));
    angle(br.to) -= br.susceptance * (sol.eta_plus(i) - sol.eta_minus(i));
    r.dual_sign = std::max({r.dual_sign, -sol.eta_plus(i), -sol.eta_minus(i)});
    if (std::isfinite(br.flow_max)) {
      r.bounds = std::max(r.bounds, f - br.flow_max);
      r.complementarity = std::max(r.complementarity, std::abs(sol.eta_plus(i) * (br.flow_max - f)));
      dual -= sol.eta_plus(i) * br.flow_max;
    }
    if (std::isfinite(br.flow_min)) {
      r.bounds = std::max(r.bounds, br.flow_min - f);
      r.complementarity = std::max(r.complementarity, std::abs(sol.eta_minus(i) * (f - br.flow_min)));
      dual += sol.eta_minus(i) * br.flow_min;
    }
  }
  r.stationarity = std::max(r.stationarity, angle.cwiseAbs().maxCoeff());
  r.gap = primal - dual;
  return r;
}

/// Random connected grid with a feasible dispatch built in: line limits are
/// set from the flows of a known feasible dispatch, times a random factor in
/// [1, 2), so some limits bind at the optimum. With `uncongested` all limits
/// are infinite.
inline OpfInstance random_opf(std::uint64_t seed, bool uncongested = false) {
  std::mt19937_64 rng(seed);
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto pick = [&](int n) { return static_cast<int>(std::uniform_int_distribution<int>(0, n - 1)(rng)); };
  OpfInstance inst;
  inst.num_buses = 2 + pick(7);
  const int n = inst.num_buses;
  inst.slack = 0;
  std::set<std::pair<int, int>> used;
  auto link = [&](int a, int b) {
    if (a == b || !used.insert({std::min(a, b), std::max(a, b)}).second) return;
    inst.branches.push_back({a, b, uni(2.0, 20.0)});
  };
  for (int b = 1; b < n; ++b) link(pick(b), b);
  for (int k = 0; k < n / 2; ++k) link(pick(n), pick(n));

  const int ng = 1 + pick(n + 2);
  for (int k = 0; k < ng; ++k) {
    OpfGenerator g;
    g.bus = k == 0 ? 0 : pick(n);
    g.c2 = uni(0.001, 0.01);
    g.c1 = uni(100.0, 130.0);
    g.p_min = pick(4) == 0 ? uni(0.0, 0.5) : 0.0;
    g.p_max = g.p_min + uni(1.0, 6.0);
    inst.generators.push_back(g);
  }
  // A feasible dispatch: every unit at a random point of its range; loads
  // spread the total over the buses.
  Eigen::VectorXd dispatch(ng);
  double total = 0.0;
  for (int k = 0; k < ng; ++k) {
    dispatch(k) = uni(inst.generators[k].p_min, inst.generators[k].p_max);
    total += dispatch(k);
  }
  Eigen::VectorXd weights(n);
  for (int b = 0; b < n; ++b) weights(b) = uni(0.1, 1.0);
  inst.load = weights / weights.sum() * total;
  inst.bus_ids.resize(n);
  for (int b = 0; b < n; ++b) inst.bus_ids[b] = b + 1;

  Eigen::MatrixXd Z = laplacian(inst);
  Eigen::VectorXd inj = -inst.load;
  for (int k = 0; k < ng; ++k) inj(inst.generators[k].bus) += dispatch(k);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(n);
  theta.tail(n - 1) = Z.bottomRightCorner(n - 1, n - 1).ldlt().solve(inj.tail(n - 1));
  if (!uncongested) {
    for (OpfBranch& br : inst.branches) {
      const double f = std::abs(br.susceptance * (theta(br.from) - theta(br.to)));
      const double limit = std::max(f * uni(1.0, 2.0), 0.05);
      br.flow_max = limit;
      br.flow_min = -limit;
    }
  }
  return inst;
}

// ---------------------------------------------------------------------------
// Affine benchmark maps f(x) = A x + b with symmetric A of a given spectral
// radius.

struct AffineMap {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const { return A * x + b; }
  Eigen::VectorXd fixed_point() const {
    return (Eigen::MatrixXd::Identity(A.rows(), A.cols()) - A).lu().solve(b);
  }
};

inline AffineMap affine_map(int n, double rho, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd M(n, n);
  for (Eigen::Index i = 0; i < M.size(); ++i) M.data()[i] = normal(rng);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(M);
  const Eigen::MatrixXd Q = qr.householderQ();
  Eigen::VectorXd eig(n);
  std::uniform_real_distribution<double> u(-rho, rho);
  for (int i = 0; i < n; ++i) eig(i) = i == 0 ? rho : u(rng);
  AffineMap f{Q * eig.asDiagonal() * Q.transpose(), Eigen::VectorXd(n)};
  for (int i = 0; i < n; ++i) f.b(i) = normal(rng);
  return f;
}

}  // namespace oracles
