#pragma once

// Safeguarded, regularized type-II Anderson acceleration for x = f(x).
//
// Each iteration i computes the gap G_i = x_i - f(x_i) and the damped fallback
// x~_{i+1} = x_i - beta G_i. With memory m = min(M, i), the last m gap and
// iterate differences form Y and S, and gamma solves
//
//   min |G_i - Y gamma|^2 + r (|Y|_F^2 + |S|_F^2) |gamma|^2.
//
// The accelerated point is sum_j alpha_j x~_{i-m+j+1} with
// alpha_0 = gamma_0, alpha_j = gamma_j - gamma_{j-1}, alpha_m = 1 - gamma_{m-1}.
// On the first step and every `check_period` accepted steps the candidate is
// only taken if |G_i|^2 <= D |G_0| (n/R + 1)^(-1-eps); otherwise the fallback
// is emitted and the check repeats next iteration.

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>
#include <utility>
#include <vector>

#include "etruck/error.hpp"
#include "etruck/types.hpp"

namespace etruck {

struct AAConfig {
  double regularization = 1e-8;   // r_AA
  double safeguard_scale = 1e5;   // D_AA
  double safeguard_decay = 1e-5;  // eps_AA
  int check_period = 10;          // R_check
  int memory = 5;                 // M_AA; 0 gives plain damped iteration
  double relaxation = 1.0;        // beta_AA
  double tolerance = 1e-6;        // eps_tol
  int max_iter = 200;
  bool keep_iterates = false;     // record emitted/fallback points in the trace

  /// Reward-design preset.
  static AAConfig elo() { return {}; }

  /// Outer price fixed-point preset.
  static AAConfig equilibrium() {
    AAConfig c;
    c.regularization = 1e-7;
    c.safeguard_scale = 1e4;
    c.safeguard_decay = 1e-5;
    c.check_period = 5;
    c.memory = 10;
    c.relaxation = 0.1;
    c.tolerance = 1e-4;
    return c;
  }

  void validate() const {
    auto fail = [](const char* field, const char* what) { throw ValidationError(std::string("aa.") + field, what); };
    if (!(regularization > 0.0)) fail("r_AA", "must be > 0");
    if (!(safeguard_scale > 0.0)) fail("D_AA", "must be > 0");
    if (!(safeguard_decay > 0.0)) fail("eps_AA", "must be > 0");
    if (check_period < 1) fail("R_check", "must be >= 1");
    if (memory < 0) fail("M_AA", "must be >= 0");
    if (!(relaxation > 0.0 && relaxation <= 1.0)) fail("beta_AA", "must lie in (0, 1]");
    if (!(tolerance > 0.0)) fail("eps_tol", "must be > 0");
    if (max_iter < 1) fail("max_iter", "must be >= 1");
  }
};

enum class AAStepKind { Initial, Accelerated, Fallback, Converged };

struct AAStep {
  int iteration = 0;
  double residual = 0.0;  // |G_i|_2 at x_i
  AAStepKind kind = AAStepKind::Initial;
  int memory = 0;         // m_i used to build the emitted point
};

struct AATrace {
  std::vector<AAStep> steps;
  // Filled only with AAConfig::keep_iterates: point emitted after step i and
  // the fallback computed at step i.
  std::vector<Vector> emitted;
  std::vector<Vector> fallback;
  bool converged = false;

  int evaluations() const noexcept { return static_cast<int>(steps.size()); }
  double final_residual() const noexcept { return steps.empty() ? 0.0 : steps.back().residual; }
};

/// Fixed-point iteration stopped without meeting its tolerance.
class FixedPointError : public Error {
 public:
  FixedPointError(const std::string& what, AATrace trace) : Error(what), trace_(std::move(trace)) {}
  const AATrace& trace() const noexcept { return trace_; }

 private:
  AATrace trace_;
};

struct AAResult {
  Vector x;   // fixed point
  Vector fx;  // f(x), the last evaluation
  AATrace trace;
};

/// Tikhonov-regularized least squares through the normal equations.
inline Vector anderson_coefficients(const Matrix& Y, const Matrix& S, const Vector& g, double regularization) {
  const double weight = regularization * (Y.squaredNorm() + S.squaredNorm());
  Matrix normal = Y.transpose() * Y;
  normal.diagonal().array() += weight;
  return normal.ldlt().solve(Y.transpose() * g);
}

template <class Map>
AAResult aa_solve(Map&& f, const Vector& x0, const AAConfig& config) {
  config.validate();
  AATrace trace;
  const double beta = config.relaxation;

  auto evaluate = [&](const Vector& x) {
    Vector fx = f(x);
    if (fx.size() != x.size()) throw ContractError("fixed-point map changed the vector dimension");
    if (!fx.allFinite()) {
      throw FixedPointError("fixed-point map returned a non-finite value at iteration " +
                                std::to_string(trace.steps.size()),
                            trace);
    }
    return fx;
  };

  Vector x = x0;
  Vector fx = evaluate(x);
  Vector gap = x - fx;
  const double gap0_norm = gap.norm();
  trace.steps.push_back({0, gap0_norm, AAStepKind::Initial, 0});
  if (gap0_norm <= config.tolerance) {
    trace.steps.back().kind = AAStepKind::Converged;
    trace.converged = true;
    return {std::move(x), std::move(fx), std::move(trace)};
  }

  // History, newest last: x_k, G_k, and fallbacks x~_{k+1} = x_k - beta G_k.
  std::deque<Vector> xs{x}, gaps{gap}, fallbacks{x - beta * gap};
  if (config.keep_iterates) {
    trace.fallback.push_back(fallbacks.back());
    trace.emitted.push_back(fallbacks.back());
  }
  x = fallbacks.back();

  int accepted = 0;     // n_AA
  int since_check = 0;  // R_AA
  bool initial = true;  // I_init
  const std::size_t keep = static_cast<std::size_t>(config.memory) + 1;

  for (int i = 1;; ++i) {
    const int m = std::min(config.memory, i);
    fx = evaluate(x);
    gap = x - fx;
    const double gap_norm = gap.norm();
    if (gap_norm <= config.tolerance) {
      trace.steps.push_back({i, gap_norm, AAStepKind::Converged, m});
      trace.converged = true;
      return {std::move(x), std::move(fx), std::move(trace)};
    }
    if (i >= config.max_iter) {
      trace.steps.push_back({i, gap_norm, AAStepKind::Initial, m});
      throw FixedPointError("Anderson iteration did not reach tolerance " + std::to_string(config.tolerance) +
                                " within " + std::to_string(config.max_iter) + " iterations (residual " +
                                std::to_string(gap_norm) + ")",
                            std::move(trace));
    }
    Vector fallback = x - beta * gap;

    xs.push_back(x);
    gaps.push_back(gap);
    fallbacks.push_back(fallback);
    while (xs.size() > keep) {
      xs.pop_front();
      gaps.pop_front();
      fallbacks.pop_front();
    }

    Vector candidate = fallback;
    if (m > 0) {
      const Eigen::Index n = x.size();
      Matrix Y(n, m), S(n, m);
      const std::size_t base = xs.size() - 1 - static_cast<std::size_t>(m);
      for (int j = 0; j < m; ++j) {
        Y.col(j) = gaps[base + j + 1] - gaps[base + j];
        S.col(j) = xs[base + j + 1] - xs[base + j];
      }
      const Vector gamma = anderson_coefficients(Y, S, gap, config.regularization);
      // Fallback x~_{i-m+j+1} lives at fallbacks[base + j].
      candidate = gamma(0) * fallbacks[base];
      for (int j = 1; j < m; ++j) candidate += (gamma(j) - gamma(j - 1)) * fallbacks[base + j];
      candidate += (1.0 - gamma(m - 1)) * fallbacks[base + m];
    }

    AAStepKind kind = AAStepKind::Accelerated;
    if (initial || since_check >= config.check_period) {
      const double bound = config.safeguard_scale * gap0_norm *
                           std::pow(static_cast<double>(accepted) / config.check_period + 1.0,
                                    -1.0 - config.safeguard_decay);
      if (gap_norm * gap_norm <= bound) {
        x = std::move(candidate);
        ++accepted;
        since_check = 1;
        initial = false;
      } else {
        x = fallback;
        since_check = 0;
        kind = AAStepKind::Fallback;
      }
    } else {
      x = std::move(candidate);
      ++accepted;
      ++since_check;
    }
    trace.steps.push_back({i, gap_norm, kind, m});
    if (config.keep_iterates) {
      trace.fallback.push_back(fallback);
      trace.emitted.push_back(x);
    }
  }

}

inline const char* to_string(AAStepKind kind) {
  switch (kind) {
    case AAStepKind::Initial: return "initial";
    case AAStepKind::Accelerated: return "accelerated";
    case AAStepKind::Fallback: return "fallback";
    case AAStepKind::Converged: return "converged";
  }
  return "?";
}

}  // namespace etruck
