#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "eks/objective.hpp"
#include "eks/subproblem.hpp"

namespace eks {

struct GgnConfig {
  /// Absolute termination threshold on the model decrease; empty selects
  /// 1e-8 * (1 + |K(x0)|) once the starting objective is known.
  std::optional<double> epsilon;
  double omega = 1e-4;  ///< ridge added to the Gauss-Newton Hessian
  double beta = 1e-4;   ///< sufficient-decrease fraction for the line search
  double gamma = 0.5;   ///< backtracking shrink factor
  int max_outer = 100;
  SubproblemOptions inner;
};

enum class SmootherStatus { Converged, MaxIterations, LineSearchStalled };

inline const char* to_string(SmootherStatus s) {
  switch (s) {
    case SmootherStatus::Converged: return "Converged";
    case SmootherStatus::MaxIterations: return "MaxIterations";
    default: return "LineSearchStalled";
  }
}

/// One accepted outer step: the objective before the step, the model
/// decrease that justified it, the accepted step size with the number of
/// line-search trials spent, and the inner solver's effort.
struct GgnIterationRecord {
  double K = 0.0;
  double delta = 0.0;
  double step = 0.0;
  int trials = 0;
  int inner_iterations = 0;
  double kkt_residual = 0.0;
};

using GgnTrace = std::vector<GgnIterationRecord>;

struct SmootherSolution {
  StateSequence x_final;
  SmootherStatus status = SmootherStatus::MaxIterations;
  GgnTrace trace;
  double K_final = std::numeric_limits<double>::infinity();
  double delta_final = 0.0;  ///< model decrease of the last direction found
};

/// Smooths a state sequence by generalized Gauss-Newton iteration: each
/// round linearizes the residual and the covariance factors at the current
/// iterate, minimizes the resulting convex barrier-regularized model over
/// the direction d, and backtracks along d until the true objective drops
/// by at least beta * t * delta. Directions predicting less than epsilon of
/// decrease terminate the loop. Every iterate stays inside the domain where
/// all covariance-factor diagonals are positive, because out-of-domain
/// trial points evaluate to +infinity and are rejected.
inline SmootherSolution smooth(const StateSpaceModel& model,
                               const StateSequence& x0,
                               const GgnConfig& cfg) {
  if (!(cfg.omega > 0.0) || !(cfg.beta > 0.0 && cfg.beta < 1.0) ||
      !(cfg.gamma > 0.0 && cfg.gamma < 1.0) || cfg.max_outer < 0 ||
      (cfg.epsilon && !(*cfg.epsilon >= 0.0)))
    throw std::invalid_argument("smooth: configuration out of range");

  SmootherSolution sol;
  sol.x_final = x0;
  ObjectiveEval cur = eval_K(model, x0);
  if (!cur.in_domain)
    throw InfeasibleStart("smooth: starting point has a nonpositive V diagonal");
  sol.K_final = cur.K;
  const double epsilon =
      cfg.epsilon ? *cfg.epsilon : 1e-8 * (1.0 + std::abs(cur.K));

  for (int outer = 0; outer < cfg.max_outer; ++outer) {
    const SubproblemData sub =
        assemble_subproblem(model, sol.x_final, cfg.omega);
    const SubproblemResult dir = solve_subproblem(sub, cfg.inner);
    sol.delta_final = dir.delta;
    sol.K_final = cur.K;
    if (dir.delta >= -epsilon) {
      sol.status = SmootherStatus::Converged;
      return sol;
    }

    double t = 1.0;
    int trials = 0;
    ObjectiveEval trial;
    bool accepted = false;
    while (t >= std::numeric_limits<double>::epsilon()) {
      ++trials;
      trial = eval_K(model, sol.x_final + t * dir.triple.d);
      if (trial.K <= cur.K + cfg.beta * t * dir.delta) {
        accepted = true;
        break;
      }
      t *= cfg.gamma;
    }
    if (!accepted) {
      sol.status = SmootherStatus::LineSearchStalled;
      return sol;
    }

    sol.trace.push_back({cur.K, dir.delta, t, trials, dir.inner_iterations,
                         dir.kkt_residual});
    sol.x_final += t * dir.triple.d;
    cur = trial;
    sol.K_final = cur.K;
  }
  sol.status = SmootherStatus::MaxIterations;
  return sol;
}

}  // namespace eks
