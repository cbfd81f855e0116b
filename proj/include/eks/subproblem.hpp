#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "eks/block_tridiagonal.hpp"
#include "eks/objective.hpp"

namespace eks {

struct SubproblemOptions {
  /// Convergence threshold scale: stop when the KKT residual drops below
  /// tol_scale * (1 + ||a||_inf).
  double tol_scale = 1e-9;
  int max_iterations = 50;
  /// Fraction-to-boundary margin keeping slacks and multipliers interior.
  double boundary_fraction = 0.995;
};

/// Subproblem unknowns: direction d, slack s (the linearized V diagonal,
/// strictly positive), and the multiplier lambda coupling them (strictly
/// positive wherever complementarity s o lambda = 1 is to hold).
struct KktTriple {
  Vector d;
  Vector s;
  Vector lambda;
};

struct SubproblemResult {
  KktTriple triple;
  double delta = 0.0;      ///< model decrease without the ridge term
  double delta_bar = 0.0;  ///< delta + (omega/2) d'd; never positive
  double kkt_residual = std::numeric_limits<double>::infinity();
  int inner_iterations = 0;
  bool converged = false;
};

/// Model decrease at direction d relative to d = 0: the change of
///   1/2 d'Cd + a'd - sum log(vdiag + Vscript d)
/// split as delta_bar (as is, ridge included since C carries omega I) and
/// delta (ridge removed), the quantity the outer loop's termination test
/// and line search consume.
struct ModelDecrease {
  double delta = 0.0;
  double delta_bar = 0.0;
};

namespace detail {

inline double subproblem_model(const SubproblemData& P, const Vector& d,
                               const Vector& s) {
  return 0.5 * d.dot(multiply(P.C, d)) + P.a.dot(d) - s.array().log().sum();
}

/// Largest step keeping v + alpha dv componentwise positive; +infinity
/// when no component decreases.
inline double positive_step(const Vector& v, const Vector& dv) {
  double alpha = std::numeric_limits<double>::infinity();
  for (int i = 0; i < v.size(); ++i)
    if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
  return alpha;
}

}  // namespace detail

inline ModelDecrease model_decrease(const SubproblemData& P, const Vector& d) {
  const Vector s = P.vdiag + P.vscript.apply(d);
  if (!(s.minCoeff() > 0.0))
    throw LinearizedDomainViolation(
        "model_decrease: linearized V diagonal not positive at d");
  ModelDecrease dec;
  dec.delta_bar =
      detail::subproblem_model(P, d, s) + P.vdiag.array().log().sum();
  dec.delta = dec.delta_bar - 0.5 * P.omega * d.squaredNorm();
  return dec;
}

/// Minimizes 1/2 d'Cd + a'd - sum_i log(vdiag + Vscript d)_i by damped
/// Newton iteration on its KKT system
///   s = vdiag + Vscript d,  s o lambda = 1,  C d + a = Vscript' lambda.
/// Starting from d = 0, s = vdiag, lambda = 1/s keeps the first equation
/// satisfied exactly throughout, so every Newton direction is a descent
/// direction for the model and a positivity-respecting backtrack always
/// makes progress. Each iteration factors one block-tridiagonal matrix:
/// the barrier curvature pulled back through Vscript only thickens the
/// diagonal blocks of C.
inline SubproblemResult solve_subproblem(const SubproblemData& P,
                                         const SubproblemOptions& opts = {}) {
  const int dim = P.C.dim();
  if (P.vdiag.size() == 0 || !(P.vdiag.minCoeff() > 0.0) ||
      !P.vdiag.allFinite())
    throw InfeasibleStart("subproblem: vdiag must be positive at the start");

  SubproblemResult res;
  res.triple.d = Vector::Zero(dim);
  res.triple.s = P.vdiag;
  res.triple.lambda = P.vdiag.cwiseInverse();
  const double tol = opts.tol_scale * (1.0 + P.a.lpNorm<Eigen::Infinity>());
  double model_cur = detail::subproblem_model(P, res.triple.d, res.triple.s);

  Vector& d = res.triple.d;
  Vector& s = res.triple.s;
  Vector& lambda = res.triple.lambda;

  auto kkt_residual = [&](const Vector& Cd) {
    const Vector comp = s.cwiseProduct(lambda) - Vector::Ones(s.size());
    const Vector stat = Cd + P.a - P.vscript.apply_transpose(lambda);
    return std::max(comp.lpNorm<Eigen::Infinity>(),
                    stat.lpNorm<Eigen::Infinity>());
  };

  for (int it = 0; it < opts.max_iterations; ++it) {
    const Vector Cd = multiply(P.C, d);
    res.kkt_residual = kkt_residual(Cd);
    if (res.kkt_residual <= tol) {
      res.converged = true;
      break;
    }

    const Vector ratio = lambda.cwiseQuotient(s);
    BlockTridiagonalMatrix Phi = P.C;
    const InterleavedLayout lay(P.vscript.n, P.vscript.N, P.vscript.m);
    for (int k = 0; k < P.vscript.N; ++k) {
      const auto& Vq = P.vscript.q[k];
      const auto& Vr = P.vscript.r[k];
      Phi.diag[k] +=
          Vq.transpose() * ratio.segment(lay.proc[k], lay.n).asDiagonal() * Vq +
          Vr.transpose() * ratio.segment(lay.meas[k], lay.m[k]).asDiagonal() *
              Vr;
    }
    const Vector gamma =
        P.vscript.apply_transpose(s.cwiseInverse()) - Cd - P.a;
    const Vector dd = solve(factor(Phi), gamma);
    const Vector ds = P.vscript.apply(dd);
    const Vector u = s + ds;
    const Vector dl =
        (Vector::Ones(u.size()) - lambda.cwiseProduct(u)).cwiseQuotient(s);

    double alpha =
        std::min(detail::positive_step(s, ds), detail::positive_step(lambda, dl));
    alpha = std::min(1.0, opts.boundary_fraction * alpha);

    // Backtrack until the model does not increase. Recomputing the slacks
    // from d keeps s = vdiag + Vscript d exact under damping.
    bool accepted = false;
    while (alpha * dd.lpNorm<Eigen::Infinity>() >
           std::numeric_limits<double>::epsilon() * 0.5) {
      const Vector d_trial = d + alpha * dd;
      const Vector s_trial = P.vdiag + P.vscript.apply(d_trial);
      if (s_trial.minCoeff() > 0.0) {
        const double model_trial =
            detail::subproblem_model(P, d_trial, s_trial);
        if (model_trial <= model_cur) {
          d = d_trial;
          s = s_trial;
          lambda += alpha * dl;
          model_cur = model_trial;
          res.inner_iterations = it + 1;
          accepted = true;
          break;
        }
      }
      alpha *= 0.5;
    }
    if (!accepted) break;  // no representable step improves the model
  }

  if (!res.converged) {
    res.kkt_residual = kkt_residual(multiply(P.C, d));
    res.converged = res.kkt_residual <= tol;
  }
  res.delta_bar = model_cur + P.vdiag.array().log().sum();
  res.delta = res.delta_bar - 0.5 * P.omega * d.squaredNorm();
  return res;
}

}  // namespace eks
