#pragma once

// DC optimal power flow per time step:
//
//   min  sum_k c2_k g_k^2 + c1_k g_k
//   s.t. sum_{k at i} g_k - (Z theta)_i = l_i      (lambda_i, the LMP)
//        theta_slack = 0                           (lambda_0)
//        gmin <= g <= gmax                         (mu-, mu+)
//        fmin <= B A^T theta <= fmax               (eta-, eta+)
//
// with Z = A B A^T the susceptance-weighted Laplacian. Solved by a dense
// Mehrotra predictor-corrector interior-point method on the augmented KKT system
//
//   [ H   A^T   G^T      ] [ dx ]   [ -r_d               ]
//   [ A   0     0        ] [ -dy] = [ -r_p               ]
//   [ G   0     -Z^-1 S  ] [ dz ]   [ -r_g + Z^-1 r_sz   ].
//
// Generators with gmin == gmax are substituted out; their bound duals are
// recovered from stationarity afterwards.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "etruck/error.hpp"
#include "etruck/parallel.hpp"
#include "etruck/scenario.hpp"
#include "etruck/types.hpp"

namespace etruck {

struct OpfBranch {
  int from = 0;  // bus index
  int to = 0;
  double susceptance = 1.0;
  double flow_min = -std::numeric_limits<double>::infinity();
  double flow_max = std::numeric_limits<double>::infinity();
};

struct OpfGenerator {
  int bus = 0;  // bus index
  double c2 = 0.0;
  double c1 = 0.0;
  double p_min = 0.0;
  double p_max = 0.0;
};

struct OpfInstance {
  int num_buses = 0;
  int slack = 0;
  std::vector<OpfBranch> branches;
  std::vector<OpfGenerator> generators;
  Vector load;               // per bus
  std::vector<int> bus_ids;  // for messages; defaults to index + 1
};

struct OpfSolution {
  Vector g;
  Vector theta;
  Vector flow;           // per branch, b (theta_from - theta_to)
  Vector lambda;         // per bus balance dual, the LMP
  double lambda_slack = 0.0;
  Vector mu_plus, mu_minus;    // per generator
  Vector eta_plus, eta_minus;  // per branch; zero where the limit is infinite
  double objective = 0.0;
  int iterations = 0;
};

struct OpfOptions {
  double tolerance = 1e-10;  // absolute, on all residuals and on every complementarity product
  int max_iter = 100;
  double divergence = 1e14;
};

inline int opf_bus_id(const OpfInstance& inst, int bus) {
  return inst.bus_ids.empty() ? bus + 1 : inst.bus_ids.at(bus);
}

inline Matrix laplacian(const OpfInstance& inst) {
  Matrix Z = Matrix::Zero(inst.num_buses, inst.num_buses);
  for (const OpfBranch& br : inst.branches) {
    Z(br.from, br.from) += br.susceptance;
    Z(br.to, br.to) += br.susceptance;
    Z(br.from, br.to) -= br.susceptance;
    Z(br.to, br.from) -= br.susceptance;
  }
  return Z;
}

inline void validate_opf_instance(const OpfInstance& inst) {
  const int n = inst.num_buses;
  if (n < 1) throw ValidationError("opf.num_buses", "must be >= 1");
  if (inst.slack < 0 || inst.slack >= n) throw ValidationError("opf.slack", "out of range");
  if (inst.load.size() != n) throw ValidationError("opf.load", "must have one entry per bus");
  if (!inst.bus_ids.empty() && static_cast<int>(inst.bus_ids.size()) != n)
    throw ValidationError("opf.bus_ids", "must be empty or have one entry per bus");
  if (!inst.load.allFinite()) throw ValidationError("opf.load", "must be finite");
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto root = [&](int v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  int components = n;
  for (std::size_t e = 0; e < inst.branches.size(); ++e) {
    const OpfBranch& br = inst.branches[e];
    const std::string field = "opf.branches[" + std::to_string(e) + "]";
    if (br.from < 0 || br.from >= n || br.to < 0 || br.to >= n || br.from == br.to)
      throw ValidationError(field, "endpoints must be distinct bus indices");
    if (!(br.susceptance > 0.0) || !std::isfinite(br.susceptance)) throw ValidationError(field, "susceptance must be > 0");
    if (std::isnan(br.flow_min) || std::isnan(br.flow_max) || br.flow_min > br.flow_max)
      throw ValidationError(field, "requires fmin <= fmax");
    const int a = root(br.from), b = root(br.to);
    if (a != b) {
      parent[a] = b;
      --components;
    }
  }
  if (components != 1) throw ValidationError("opf.branches", "bus graph is not connected");
  bool dispatchable = false;
  for (std::size_t k = 0; k < inst.generators.size(); ++k) {
    const OpfGenerator& gen = inst.generators[k];
    const std::string field = "opf.generators[" + std::to_string(k) + "]";
    if (gen.bus < 0 || gen.bus >= n) throw ValidationError(field, "bus out of range");
    if (!(gen.c2 > 0.0) || !(gen.c1 > 0.0)) throw ValidationError(field, "requires c2 > 0 and c1 > 0");
    if (!std::isfinite(gen.p_min) || !std::isfinite(gen.p_max) || gen.p_min > gen.p_max)
      throw ValidationError(field, "requires finite gmin <= gmax");
    dispatchable = dispatchable || gen.p_min < gen.p_max;
  }
  if (!dispatchable) throw ValidationError("opf.generators", "at least one generator must have gmin < gmax");
}

/// OPF instance of one time step; `load` holds one entry per load bus.
template <class Row>
OpfInstance make_opf_instance(const Scenario& sc, const Row& load) {
  if (static_cast<int>(load.size()) != sc.num_load_buses())
    throw ContractError("load row must have one entry per load bus");
  const PowerGrid& pw = sc.data().power;
  OpfInstance inst;
  inst.num_buses = sc.num_buses();
  inst.slack = sc.slack();
  for (const Branch& br : pw.branches)
    inst.branches.push_back({sc.bus_index(br.from), sc.bus_index(br.to), br.susceptance, br.flow_min, br.flow_max});
  for (const Generator& g : pw.generators) inst.generators.push_back({sc.bus_index(g.bus), g.c2, g.c1, g.p_min, g.p_max});
  inst.load = Vector::Zero(inst.num_buses);
  for (int j = 0; j < sc.num_load_buses(); ++j) inst.load(sc.load_bus(j)) = load[j];
  for (int b = 0; b < inst.num_buses; ++b) inst.bus_ids.push_back(sc.bus_id(b));
  return inst;
}

namespace detail {

struct OpfRow {
  enum Kind { GenUpper, GenLower, LineUpper, LineLower } kind;
  int index;  // generator or branch
};

inline double max_step(const Vector& v, const Vector& dv) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
  }
  return alpha;
}

inline std::string worst_balance_bus(const OpfInstance& inst, const Vector& balance) {
  Eigen::Index worst = 0;
  balance.cwiseAbs().maxCoeff(&worst);
  std::ostringstream os;
  os << "largest power-balance violation " << std::abs(balance(worst)) << " at bus "
     << opf_bus_id(inst, static_cast<int>(worst));
  return os.str();
}

}  // namespace detail

/// Globally optimal dispatch with duals. `step` only labels errors.
inline OpfSolution solve_opf(const OpfInstance& inst, const OpfOptions& opt = {}, int step = -1) {
  validate_opf_instance(inst);
  const int n = inst.num_buses;
  const int ng = static_cast<int>(inst.generators.size());

  double total_load = inst.load.sum(), cap_min = 0.0, cap_max = 0.0;
  for (const OpfGenerator& gen : inst.generators) {
    cap_min += gen.p_min;
    cap_max += gen.p_max;
  }
  const double slack_tol = 1e-9 * (1.0 + std::abs(total_load));
  if (total_load > cap_max + slack_tol || total_load < cap_min - slack_tol) {
    std::ostringstream os;
    os << "total load " << total_load << " outside generation range [" << cap_min << ", " << cap_max << "]";
    throw InfeasibleError(step, os.str());
  }

  // Variables: free generators, then all bus angles.
  std::vector<int> free_gens, column(ng, -1);
  for (int k = 0; k < ng; ++k) {
    if (inst.generators[k].p_min < inst.generators[k].p_max) {
      column[k] = static_cast<int>(free_gens.size());
      free_gens.push_back(k);
    }
  }
  const int nf = static_cast<int>(free_gens.size());
  const int nx = nf + n;
  const Matrix Z = laplacian(inst);

  Vector hdiag = Vector::Zero(nx), c = Vector::Zero(nx);
  for (int j = 0; j < nf; ++j) {
    hdiag(j) = 2.0 * inst.generators[free_gens[j]].c2;
    c(j) = inst.generators[free_gens[j]].c1;
  }

  const int ne = n + 1;
  Matrix A = Matrix::Zero(ne, nx);
  Vector b = inst.load;
  b.conservativeResize(ne);
  b(n) = 0.0;
  for (int k = 0; k < ng; ++k) {
    if (column[k] >= 0) A(inst.generators[k].bus, column[k]) = 1.0;
    else b(inst.generators[k].bus) -= inst.generators[k].p_min;
  }
  A.block(0, nf, n, n) = -Z;
  A(n, nf + inst.slack) = 1.0;

  std::vector<detail::OpfRow> rows;
  std::vector<double> hvec;
  for (int j = 0; j < nf; ++j) {
    rows.push_back({detail::OpfRow::GenUpper, free_gens[j]});
    hvec.push_back(inst.generators[free_gens[j]].p_max);
    rows.push_back({detail::OpfRow::GenLower, free_gens[j]});
    hvec.push_back(-inst.generators[free_gens[j]].p_min);
  }
  for (std::size_t e = 0; e < inst.branches.size(); ++e) {
    if (std::isfinite(inst.branches[e].flow_max)) {
      rows.push_back({detail::OpfRow::LineUpper, static_cast<int>(e)});
      hvec.push_back(inst.branches[e].flow_max);
    }
    if (std::isfinite(inst.branches[e].flow_min)) {
      rows.push_back({detail::OpfRow::LineLower, static_cast<int>(e)});
      hvec.push_back(-inst.branches[e].flow_min);
    }
  }
  const int m = static_cast<int>(rows.size());
  Matrix G = Matrix::Zero(m, nx);
  const Vector h = Eigen::Map<const Vector>(hvec.data(), m);
  for (int r = 0; r < m; ++r) {
    const detail::OpfRow& row = rows[r];
    switch (row.kind) {
      case detail::OpfRow::GenUpper: G(r, column[row.index]) = 1.0; break;
      case detail::OpfRow::GenLower: G(r, column[row.index]) = -1.0; break;
      case detail::OpfRow::LineUpper:
      case detail::OpfRow::LineLower: {
        const OpfBranch& br = inst.branches[row.index];
        const double sign = row.kind == detail::OpfRow::LineUpper ? 1.0 : -1.0;
        G(r, nf + br.from) = sign * br.susceptance;
        G(r, nf + br.to) = -sign * br.susceptance;
        break;
      }
    }
  }

  Vector x = Vector::Zero(nx);
  for (int j = 0; j < nf; ++j) {
    const OpfGenerator& gen = inst.generators[free_gens[j]];
    x(j) = 0.5 * (gen.p_min + gen.p_max);
  }
  Vector y = Vector::Zero(ne);
  Vector s = (h - G * x).cwiseMax(1.0);
  Vector z = Vector::Ones(m);

  auto residuals = [&](Vector& rd, Vector& rp, Vector& rg) {
    rd = hdiag.cwiseProduct(x) + c - A.transpose() * y + G.transpose() * z;
    rp = A * x - b;
    rg = G * x + s - h;
  };
  auto inf_norm = [](const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); };

  Vector rd, rp, rg;
  int iter = 0;
  bool converged = false;
  for (; iter <= opt.max_iter; ++iter) {
    residuals(rd, rp, rg);
    const double mu = m > 0 ? s.dot(z) / m : 0.0;
    const double worst_product = m > 0 ? s.cwiseProduct(z).maxCoeff() : 0.0;
    if (inf_norm(rd) <= opt.tolerance && inf_norm(rp) <= opt.tolerance && inf_norm(rg) <= opt.tolerance &&
        worst_product <= opt.tolerance) {
      converged = true;
      break;
    }
    if (iter == opt.max_iter) break;
    if (inf_norm(z) > opt.divergence || inf_norm(x) > opt.divergence || inf_norm(y) > opt.divergence) {
      throw InfeasibleError(step, "interior-point iterates diverged; " + detail::worst_balance_bus(inst, rp.head(n)));
    }

    const int nk = nx + ne + m;
    Matrix kkt = Matrix::Zero(nk, nk);
    kkt.topLeftCorner(nx, nx).diagonal() = hdiag;
    kkt.block(0, nx, nx, ne) = A.transpose();
    kkt.block(0, nx + ne, nx, m) = G.transpose();
    kkt.block(nx, 0, ne, nx) = A;
    kkt.block(nx + ne, 0, m, nx) = G;
    kkt.bottomRightCorner(m, m).diagonal() = -s.cwiseQuotient(z);
    const Eigen::PartialPivLU<Matrix> lu(kkt);

    auto newton = [&](const Vector& rsz, Vector& dx, Vector& dy, Vector& ds, Vector& dz) {
      Vector rhs(nk);
      rhs.head(nx) = -rd;
      rhs.segment(nx, ne) = -rp;
      rhs.tail(m) = -rg + rsz.cwiseQuotient(z);
      Vector sol = lu.solve(rhs);
      sol += lu.solve(rhs - kkt * sol);
      dx = sol.head(nx);
      dy = -sol.segment(nx, ne);
      dz = sol.tail(m);
      ds = -(rsz + s.cwiseProduct(dz)).cwiseQuotient(z);
    };

    Vector dx, dy, ds, dz;
    const Vector rsz_aff = s.cwiseProduct(z);
    newton(rsz_aff, dx, dy, ds, dz);
    if (m > 0) {
      const double alpha_aff = std::min(detail::max_step(s, ds), detail::max_step(z, dz));
      const double mu_aff = (s + alpha_aff * ds).dot(z + alpha_aff * dz) / m;
      const double sigma = std::pow(mu_aff / mu, 3);
      const Vector rsz = rsz_aff + ds.cwiseProduct(dz) - Vector::Constant(m, sigma * mu);
      newton(rsz, dx, dy, ds, dz);
    }
    const double alpha = m > 0 ? std::min(1.0, 0.995 * std::min(detail::max_step(s, ds), detail::max_step(z, dz))) : 1.0;
    x += alpha * dx;
    y += alpha * dy;
    s += alpha * ds;
    z += alpha * dz;
  }

  if (!converged) {
    if (inf_norm(rp) > 1e-6 || inf_norm(rg) > 1e-6)
      throw InfeasibleError(step, "no feasible dispatch found; " + detail::worst_balance_bus(inst, rp.head(n)));
    std::ostringstream os;
    os << "interior-point method stopped after " << opt.max_iter << " iterations (stationarity " << inf_norm(rd)
       << ", balance " << inf_norm(rp) << ", bounds " << inf_norm(rg) << ", complementarity "
       << (m > 0 ? s.dot(z) / m : 0.0) << ")";
    if (step >= 0) os << " at t=" << step;
    throw SolverError(os.str());
  }

  OpfSolution sol;
  sol.iterations = iter;
  sol.g.resize(ng);
  for (int k = 0; k < ng; ++k) sol.g(k) = column[k] >= 0 ? x(column[k]) : inst.generators[k].p_min;
  sol.theta = x.tail(n).array() - x(nf + inst.slack);
  sol.lambda = y.head(n);
  sol.lambda_slack = -y(n);
  sol.mu_plus = Vector::Zero(ng);
  sol.mu_minus = Vector::Zero(ng);
  const int nb = static_cast<int>(inst.branches.size());
  sol.eta_plus = Vector::Zero(nb);
  sol.eta_minus = Vector::Zero(nb);
  for (int r = 0; r < m; ++r) {
    switch (rows[r].kind) {
      case detail::OpfRow::GenUpper: sol.mu_plus(rows[r].index) = z(r); break;
      case detail::OpfRow::GenLower: sol.mu_minus(rows[r].index) = z(r); break;
      case detail::OpfRow::LineUpper: sol.eta_plus(rows[r].index) = z(r); break;
      case detail::OpfRow::LineLower: sol.eta_minus(rows[r].index) = z(r); break;
    }
  }
  for (int k = 0; k < ng; ++k) {
    if (column[k] >= 0) continue;
    const OpfGenerator& gen = inst.generators[k];
    const double excess = 2.0 * gen.c2 * sol.g(k) + gen.c1 - sol.lambda(gen.bus);
    sol.mu_plus(k) = std::max(-excess, 0.0);
    sol.mu_minus(k) = std::max(excess, 0.0);
  }
  sol.flow.resize(nb);
  for (int e = 0; e < nb; ++e) {
    const OpfBranch& br = inst.branches[e];
    sol.flow(e) = br.susceptance * (sol.theta(br.from) - sol.theta(br.to));
  }
  for (int k = 0; k < ng; ++k) {
    const OpfGenerator& gen = inst.generators[k];
    sol.objective += (gen.c2 * sol.g(k) + gen.c1) * sol.g(k);
  }
  return sol;
}

/// Per-bus LMPs.
inline const Vector& lmp(const OpfSolution& sol) { return sol.lambda; }

/// LMPs at the load buses of a scenario, in load-column order.
inline Vector load_lmp(const Scenario& sc, const OpfSolution& sol) {
  Vector out(sc.num_load_buses());
  for (int j = 0; j < sc.num_load_buses(); ++j) out(j) = sol.lambda(sc.load_bus(j));
  return out;
}

struct KktReport {
  double stationarity = 0.0;        // generator and angle rows
  double primal_feasibility = 0.0;  // balance, slack angle, bound and line violations
  double dual_feasibility = 0.0;    // most negative bound or line dual
  double complementarity = 0.0;     // largest dual times slack
  double duality_gap = 0.0;         // primal minus dual objective
  double dual_objective = 0.0;
  int active_rows = 0;              // equalities plus active inequalities
  int active_rank = 0;
  int columns = 0;
  bool licq = true;
  std::vector<std::string> binding;  // active inequalities, e.g. "gen 3 max"
};

/// KKT residuals recomputed from the solution fields, plus the rank of the
/// Jacobian of equality and active inequality constraints.
inline KktReport kkt_diagnostics(const OpfInstance& inst, const OpfSolution& sol, double active_tol = 1e-6) {
  const int n = inst.num_buses;
  const int ng = static_cast<int>(inst.generators.size());
  const int nb = static_cast<int>(inst.branches.size());
  const Matrix Z = laplacian(inst);
  KktReport rep;

  for (int k = 0; k < ng; ++k) {
    const OpfGenerator& gen = inst.generators[k];
    const double r = 2.0 * gen.c2 * sol.g(k) + gen.c1 - sol.lambda(gen.bus) + sol.mu_plus(k) - sol.mu_minus(k);
    rep.stationarity = std::max(rep.stationarity, std::abs(r));
  }
  Vector angle = Z * sol.lambda;
  angle(inst.slack) += sol.lambda_slack;
  for (int e = 0; e < nb; ++e) {
    const OpfBranch& br = inst.branches[e];
    const double d = br.susceptance * (sol.eta_plus(e) - sol.eta_minus(e));
    angle(br.from) += d;
    angle(br.to) -= d;
  }
  if (n > 0) rep.stationarity = std::max(rep.stationarity, angle.cwiseAbs().maxCoeff());

  Vector balance = -Z * sol.theta - inst.load;
  for (int k = 0; k < ng; ++k) balance(inst.generators[k].bus) += sol.g(k);
  rep.primal_feasibility = std::max(balance.cwiseAbs().maxCoeff(), std::abs(sol.theta(inst.slack)));
  double dual_min = 0.0;
  auto complement = [&](double dual, double slack) {
    rep.complementarity = std::max(rep.complementarity, std::abs(dual * slack));
  };
  for (int k = 0; k < ng; ++k) {
    const OpfGenerator& gen = inst.generators[k];
    rep.primal_feasibility = std::max({rep.primal_feasibility, sol.g(k) - gen.p_max, gen.p_min - sol.g(k)});
    dual_min = std::min({dual_min, sol.mu_plus(k), sol.mu_minus(k)});
    complement(sol.mu_plus(k), gen.p_max - sol.g(k));
    complement(sol.mu_minus(k), sol.g(k) - gen.p_min);
  }
  for (int e = 0; e < nb; ++e) {
    const OpfBranch& br = inst.branches[e];
    const double f = br.susceptance * (sol.theta(br.from) - sol.theta(br.to));
    dual_min = std::min({dual_min, sol.eta_plus(e), sol.eta_minus(e)});
    if (std::isfinite(br.flow_max)) {
      rep.primal_feasibility = std::max(rep.primal_feasibility, f - br.flow_max);
      complement(sol.eta_plus(e), br.flow_max - f);
    }
    if (std::isfinite(br.flow_min)) {
      rep.primal_feasibility = std::max(rep.primal_feasibility, br.flow_min - f);
      complement(sol.eta_minus(e), f - br.flow_min);
    }
  }
  rep.dual_feasibility = -dual_min;

  double primal = 0.0, dual = sol.lambda.dot(inst.load);
  for (int k = 0; k < ng; ++k) {
    const OpfGenerator& gen = inst.generators[k];
    primal += (gen.c2 * sol.g(k) + gen.c1) * sol.g(k);
    dual += -gen.c2 * sol.g(k) * sol.g(k) - sol.mu_plus(k) * gen.p_max + sol.mu_minus(k) * gen.p_min;
  }
  for (int e = 0; e < nb; ++e) {
    const OpfBranch& br = inst.branches[e];
    if (std::isfinite(br.flow_max)) dual -= sol.eta_plus(e) * br.flow_max;
    if (std::isfinite(br.flow_min)) dual += sol.eta_minus(e) * br.flow_min;
  }
  rep.dual_objective = dual;
  rep.duality_gap = primal - dual;

  // Jacobian over [g; theta]: balance rows, slack row, active bounds and lines.
  // A fixed generator contributes a single equality row.
  rep.columns = ng + n;
  std::vector<Vector> jac;
  for (int i = 0; i < n; ++i) {
    Vector row = Vector::Zero(rep.columns);
    for (int k = 0; k < ng; ++k) {
      if (inst.generators[k].bus == i) row(k) = 1.0;
    }
    row.tail(n) = -Z.row(i).transpose();
    jac.push_back(std::move(row));
  }
  {
    Vector row = Vector::Zero(rep.columns);
    row(ng + inst.slack) = 1.0;
    jac.push_back(std::move(row));
  }
  for (int k = 0; k < ng; ++k) {
    const OpfGenerator& gen = inst.generators[k];
    const bool fixed = !(gen.p_min < gen.p_max);
    const bool at_max = gen.p_max - sol.g(k) <= active_tol;
    const bool at_min = sol.g(k) - gen.p_min <= active_tol;
    if (fixed || at_max || at_min) {
      Vector row = Vector::Zero(rep.columns);
      row(k) = 1.0;
      jac.push_back(std::move(row));
      if (fixed) rep.binding.push_back("gen " + std::to_string(k) + " fixed");
      else rep.binding.push_back("gen " + std::to_string(k) + (at_max ? " max" : " min"));
    }
  }
  for (int e = 0; e < nb; ++e) {
    const OpfBranch& br = inst.branches[e];
    const double f = br.susceptance * (sol.theta(br.from) - sol.theta(br.to));
    const bool upper = std::isfinite(br.flow_max) && br.flow_max - f <= active_tol;
    const bool lower = std::isfinite(br.flow_min) && f - br.flow_min <= active_tol;
    for (int side = 0; side < int(upper) + int(lower); ++side) {
      Vector row = Vector::Zero(rep.columns);
      row(ng + br.from) = br.susceptance;
      row(ng + br.to) = -br.susceptance;
      jac.push_back(std::move(row));
    }
    if (upper) rep.binding.push_back("line " + std::to_string(e) + " max");
    if (lower) rep.binding.push_back("line " + std::to_string(e) + " min");
  }
  rep.active_rows = static_cast<int>(jac.size());
  Matrix J(rep.active_rows, rep.columns);
  for (int r = 0; r < rep.active_rows; ++r) J.row(r) = jac[r].transpose();
  Eigen::FullPivLU<Matrix> lu(J);
  lu.setThreshold(1e-10);
  rep.active_rank = static_cast<int>(lu.rank());
  rep.licq = rep.active_rank == rep.active_rows;
  return rep;
}

struct OpfHorizon {
  std::vector<OpfSolution> steps;
  PriceField lmp;  // T x load buses
  double total_cost = 0.0;
};

/// Independent OPF per time step for a T x load-bus load matrix.
inline OpfHorizon solve_opf_horizon(const Scenario& sc, const PriceField& total_load, int workers = 1,
                                    const OpfOptions& opt = {}) {
  if (total_load.cols() != sc.num_load_buses()) throw ContractError("load matrix must have one column per load bus");
  const int T = static_cast<int>(total_load.rows());
  OpfHorizon out;
  out.steps.resize(T);
  out.lmp.resize(T, sc.num_load_buses());
  parallel_for(0, static_cast<std::size_t>(T), workers, [&](std::size_t t) {
    const Vector row = total_load.row(static_cast<Eigen::Index>(t)).transpose();
    out.steps[t] = solve_opf(make_opf_instance(sc, row), opt, static_cast<int>(t));
    out.lmp.row(static_cast<Eigen::Index>(t)) = load_lmp(sc, out.steps[t]).transpose();
  }, 1);
  for (const OpfSolution& s : out.steps) out.total_cost += s.objective;
  return out;
}

/// Largest marginal cost 2 c2 gmax + c1 over all generators.
inline double max_marginal_cost(const Scenario& sc) {
  double best = 0.0;
  for (const Generator& g : sc.data().power.generators) best = std::max(best, 2.0 * g.c2 * g.p_max + g.c1);
  return best;
}

}  // namespace etruck
