#pragma once

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "eks/block_tridiagonal.hpp"
#include "eks/state_space_model.hpp"

namespace eks {

/// The extended objective at a state sequence:
///   K(x) = 1/2 ||V(x) c(x)||^2 - sum_i log V_ii(x).
/// Outside the domain (some V_ii <= 0) K is the +infinity sentinel.
struct ObjectiveEval {
  double K = 0.0;
  double quad = 0.0;     ///< 1/2 ||V c||^2
  double barrier = 0.0;  ///< -sum log V_ii
  bool in_domain = false;
};

/// Jacobian of the V-diagonal with respect to the state, stored per step:
/// row block k touches only state block k, so the matrix is block sparse
/// with one n-by-n and one m(k)-by-n block per step.
struct VDiagJacobian {
  int n = 0, N = 0;
  std::vector<int> m;
  std::vector<Matrix> q;  ///< d diag(Q_k^{-1/2}) / d x_k
  std::vector<Matrix> r;  ///< d diag(R_k^{-1/2}) / d x_k

  Vector apply(const Vector& d) const {
    const InterleavedLayout lay(n, N, m);
    if (d.size() != n * N)
      throw DimensionMismatch("vdiag jacobian apply: vector length");
    Vector out(lay.total);
    for (int k = 0; k < N; ++k) {
      const auto dk = d.segment(k * n, n);
      out.segment(lay.proc[k], n) = q[k] * dk;
      out.segment(lay.meas[k], m[k]) = r[k] * dk;
    }
    return out;
  }

  Vector apply_transpose(const Vector& y) const {
    const InterleavedLayout lay(n, N, m);
    if (y.size() != lay.total)
      throw DimensionMismatch("vdiag jacobian apply_transpose: vector length");
    Vector out(n * N);
    for (int k = 0; k < N; ++k)
      out.segment(k * n, n) =
          q[k].transpose() * y.segment(lay.proc[k], n) +
          r[k].transpose() * y.segment(lay.meas[k], m[k]);
    return out;
  }
};

/// Data of the direction-finding subproblem at a fixed state:
///   minimize 1/2 d^T C d + a^T d - sum_i log(vdiag + Vscript d)_i
/// with C = omega I + Psi^T Psi block tridiagonal and positive definite.
struct SubproblemData {
  BlockTridiagonalMatrix C;
  Vector a;               ///< gradient of the quadratic portion
  Vector vdiag;           ///< diag(V) at the expansion point
  VDiagJacobian vscript;  ///< d vdiag / d x
  double omega = 0.0;
};

namespace detail {

/// Everything the objective derivatives share: residual slices, factors,
/// the Psi blocks, and the factor-derivative contractions.
struct AssemblyCore {
  InterleavedLayout lay;
  Vector c;
  CovarianceFactors fac;
  std::vector<Vector> w;     ///< process residuals x_k - g_k(x_{k-1})
  std::vector<Vector> v;     ///< measurement residuals z_k - h_k(x_k)
  std::vector<Matrix> P;     ///< Psi diagonal process block: Q^{-1/2} + Qt
  std::vector<Matrix> Mb;    ///< Psi measurement block: R^{-1/2} H - Rt
  std::vector<Matrix> S;     ///< Psi sub-diagonal block: -Q^{-1/2} G, k >= 1
  VDiagJacobian vscript;
  Vector a;
};

inline AssemblyCore assemble_core(const StateSpaceModel& model,
                                  const StateSequence& x) {
  AssemblyCore core;
  core.lay = InterleavedLayout::of(model);
  core.fac = factor_V(model, x);
  if (!core.fac.in_domain)
    throw OutOfDomain("objective derivatives requested outside dom(K)");
  core.c = residual_c(model, x);
  const ResidualJacobian J = jacobian_c(model, x);
  const int n = model.n;
  const int N = model.N;

  core.w.resize(N);
  core.v.resize(N);
  core.P.resize(N);
  core.Mb.resize(N);
  core.S.resize(N);
  core.vscript.n = n;
  core.vscript.N = N;
  core.vscript.m = model.m;
  core.vscript.q.resize(N);
  core.vscript.r.resize(N);

  for (int k = 0; k < N; ++k) {
    const int mk = model.m[k];
    const auto xk = x.segment(k * n, n);
    core.w[k] = core.c.segment(core.lay.proc[k], n);
    core.v[k] = -core.c.segment(core.lay.meas[k], mk);

    const std::vector<Matrix> Dq = model.qfac_deriv(k + 1, xk);
    const std::vector<Matrix> Dr = model.rfac_deriv(k + 1, xk);
    if (static_cast<int>(Dq.size()) != n || static_cast<int>(Dr.size()) != mk)
      throw DimensionMismatch("factor derivative tensor: wrong row count");

    // Qt row j = d[(Q^{-1/2} w)_j]/dx with w frozen; same for Rt against the
    // measurement residual. Row j of the diagonal-derivative block is row j
    // of the j-th derivative matrix.
    Matrix Qt = Matrix::Zero(n, n);
    Matrix Vq(n, n);
    for (int j = 0; j < n; ++j) {
      if (Dq[j].rows() != n || Dq[j].cols() != n)
        throw DimensionMismatch("qfac_deriv: wrong matrix shape");
      Qt.row(j) = core.w[k].transpose() * Dq[j];
      Vq.row(j) = Dq[j].row(j);
    }
    Matrix Rt = Matrix::Zero(mk, n);
    Matrix Vr(mk, n);
    for (int j = 0; j < mk; ++j) {
      if (Dr[j].rows() != mk || Dr[j].cols() != n)
        throw DimensionMismatch("rfac_deriv: wrong matrix shape");
      Rt.row(j) = core.v[k].transpose() * Dr[j];
      Vr.row(j) = Dr[j].row(j);
    }
    core.vscript.q[k] = std::move(Vq);
    core.vscript.r[k] = std::move(Vr);

    core.P[k] = core.fac.q[k] + Qt;
    core.Mb[k] = core.fac.r[k] * J.H[k] - Rt;
    if (k > 0) core.S[k] = -(core.fac.q[k] * J.G[k]);
  }

  // a = Psi^T V c, column block by column block. The measurement block of
  // V c is -R^{-1/2} v.
  core.a.resize(n * N);
  for (int k = 0; k < N; ++k) {
    Vector ak = core.P[k].transpose() * (core.fac.q[k] * core.w[k]) -
                core.Mb[k].transpose() * (core.fac.r[k] * core.v[k]);
    if (k + 1 < N)
      ak += core.S[k + 1].transpose() * (core.fac.q[k + 1] * core.w[k + 1]);
    core.a.segment(k * n, n) = ak;
  }
  return core;
}

}  // namespace detail

inline ObjectiveEval eval_K(const StateSpaceModel& model,
                            const StateSequence& x) {
  const auto lay = InterleavedLayout::of(model);
  const CovarianceFactors fac = factor_V(model, x);
  const Vector c = residual_c(model, x);
  ObjectiveEval ev;
  ev.in_domain = fac.in_domain;
  double quad = 0.0;
  for (int k = 0; k < model.N; ++k) {
    quad += (fac.q[k] * c.segment(lay.proc[k], model.n)).squaredNorm();
    quad += (fac.r[k] * c.segment(lay.meas[k], model.m[k])).squaredNorm();
  }
  ev.quad = 0.5 * quad;
  if (!ev.in_domain) {
    ev.barrier = std::numeric_limits<double>::infinity();
    ev.K = std::numeric_limits<double>::infinity();
    return ev;
  }
  ev.barrier = -fac.vdiag.array().log().sum();
  ev.K = ev.quad + ev.barrier;
  return ev;
}

/// Gradient of K: a(x) minus the barrier term Vscript^T (1 / vdiag).
inline Vector grad_K(const StateSpaceModel& model, const StateSequence& x) {
  const auto core = detail::assemble_core(model, x);
  return core.a - core.vscript.apply_transpose(core.fac.vdiag.cwiseInverse());
}

/// Assembles the Gauss-Newton subproblem at x:
///   C_k = omega I + P_k^T P_k + M_k^T M_k + S_{k+1}^T S_{k+1}
///   A_k = P_k^T S_k
/// with P, M, S the blocks of Psi = V dc + (c^T (x) I) dV. The matrix C is
/// positive definite for any omega > 0 because dc is injective.
inline SubproblemData assemble_subproblem(const StateSpaceModel& model,
                                          const StateSequence& x,
                                          double omega) {
  if (!(omega > 0.0))
    throw std::invalid_argument("assemble_subproblem: omega must be positive");
  auto core = detail::assemble_core(model, x);
  const int n = model.n;
  const int N = model.N;
  std::vector<Matrix> diag(N);
  std::vector<Matrix> sub(N - 1);
  for (int k = 0; k < N; ++k) {
    Matrix Ck = omega * Matrix::Identity(n, n);
    Ck += core.P[k].transpose() * core.P[k];
    Ck += core.Mb[k].transpose() * core.Mb[k];
    if (k + 1 < N) Ck += core.S[k + 1].transpose() * core.S[k + 1];
    diag[k] = std::move(Ck);
    if (k > 0) sub[k - 1] = core.P[k].transpose() * core.S[k];
  }
  return SubproblemData{
      BlockTridiagonalMatrix(std::move(diag), std::move(sub)),
      std::move(core.a), std::move(core.fac.vdiag), std::move(core.vscript),
      omega};
}

}  // namespace eks
