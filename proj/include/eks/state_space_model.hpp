#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <utility>
#include <vector>

#include "eks/errors.hpp"
#include "eks/types.hpp"

namespace eks {

/// Nonlinear state-space model with state-dependent noise, supplied as
/// callbacks. Time steps are 1-based: the prior block is x_1 = g0 + w_1,
/// the transition g(k, x_{k-1}) is called for k = 2..N, measurements for
/// k = 1..N.
///
/// Covariances enter as inverse Cholesky factors: qfac(k, x_k) is the lower
/// triangular L with L^T L = Q_k(x_k)^{-1}, rfac likewise for R_k. Their
/// state derivatives are supplied as a tensor: qfac_deriv(k, x_k)[j] is the
/// n-by-n matrix D with D(l, p) = d[L(j, l)]/d[x_k(p)], i.e. one derivative
/// matrix per factor row, so contracting a residual against the tensor is a
/// flat sum over rows. rfac_deriv returns m(k) matrices of size m(k)-by-n.
struct StateSpaceModel {
  int N = 0;           ///< number of time steps
  int n = 0;           ///< state dimension
  std::vector<int> m;  ///< measurement dimension per step, m[k-1]

  std::function<Vector(int, const Vector&)> g;
  std::function<Matrix(int, const Vector&)> G;  ///< dg_k/dx_{k-1}
  std::function<Vector(int, const Vector&)> h;
  std::function<Matrix(int, const Vector&)> H;  ///< dh_k/dx_k

  std::function<Matrix(int, const Vector&)> qfac;
  std::function<std::vector<Matrix>(int, const Vector&)> qfac_deriv;
  std::function<Matrix(int, const Vector&)> rfac;
  std::function<std::vector<Matrix>(int, const Vector&)> rfac_deriv;

  Vector g0;              ///< prior mean g_1(x_0)
  std::vector<Vector> z;  ///< measurements, z[k-1]

  int state_count() const { return n * N; }
  int measurement_count() const {
    return std::accumulate(m.begin(), m.end(), 0);
  }
};

/// Stacked state sequence, N blocks of length n.
using StateSequence = Vector;

/// Row offsets of the interleaved residual layout: per step, the process
/// block (length n) precedes the measurement block (length m(k)).
struct InterleavedLayout {
  int n = 0, N = 0, M = 0, total = 0;
  std::vector<int> proc;  ///< offset of process block k (0-based step)
  std::vector<int> meas;  ///< offset of measurement block k
  std::vector<int> m;

  InterleavedLayout() = default;
  InterleavedLayout(int n_, int N_, std::vector<int> m_)
      : n(n_), N(N_), m(std::move(m_)) {
    proc.resize(N);
    meas.resize(N);
    int off = 0;
    for (int k = 0; k < N; ++k) {
      proc[k] = off;
      off += n;
      meas[k] = off;
      off += m[k];
    }
    total = off;
    M = off - n * N;
  }

  static InterleavedLayout of(const StateSpaceModel& model) {
    return InterleavedLayout(model.n, model.N, model.m);
  }
};

namespace detail {

inline void check_state(const StateSpaceModel& model, const StateSequence& x,
                        const char* where) {
  if (model.N <= 0 || model.n <= 0 ||
      static_cast<int>(model.m.size()) != model.N)
    throw DimensionMismatch(std::string(where) + ": malformed model dimensions");
  if (x.size() != model.state_count())
    throw DimensionMismatch(std::string(where) + ": state sequence length");
}

inline Vector callback_vec(const std::function<Vector(int, const Vector&)>& f,
                           int k, const Vector& x, int expect,
                           const char* name) {
  Vector v = f(k, x);
  if (v.size() != expect)
    throw DimensionMismatch(std::string(name) + ": wrong output length at step " +
                            std::to_string(k));
  return v;
}

inline Matrix callback_mat(const std::function<Matrix(int, const Vector&)>& f,
                           int k, const Vector& x, int rows, int cols,
                           const char* name) {
  Matrix A = f(k, x);
  if (A.rows() != rows || A.cols() != cols)
    throw DimensionMismatch(std::string(name) + ": wrong output shape at step " +
                            std::to_string(k));
  return A;
}

}  // namespace detail

/// Stacked residual in the interleaved order: per step k the process block
/// x_k - g_k(x_{k-1}) (x_1 - g0 for the first) then the measurement block
/// h_k(x_k) - z_k.
inline Vector residual_c(const StateSpaceModel& model, const StateSequence& x) {
  detail::check_state(model, x, "residual_c");
  const auto lay = InterleavedLayout::of(model);
  const int n = model.n;
  Vector c(lay.total);
  for (int k = 0; k < model.N; ++k) {
    const auto xk = x.segment(k * n, n);
    if (k == 0) {
      if (model.g0.size() != n) throw DimensionMismatch("residual_c: g0 length");
      c.segment(lay.proc[k], n) = xk - model.g0;
    } else {
      c.segment(lay.proc[k], n) =
          xk - detail::callback_vec(model.g, k + 1, x.segment((k - 1) * n, n), n, "g");
    }
    if (static_cast<int>(model.z.size()) != model.N ||
        model.z[k].size() != model.m[k])
      throw DimensionMismatch("residual_c: measurement sequence shape");
    c.segment(lay.meas[k], model.m[k]) =
        detail::callback_vec(model.h, k + 1, xk, model.m[k], "h") - model.z[k];
  }
  return c;
}

/// Block-diagonal factor V(x): the inverse Cholesky factors evaluated along
/// the sequence, interleaved Q then R per step, plus the diagonal vector and
/// the domain flag (all diagonal entries strictly positive). The flag is
/// reported rather than thrown; the line search probes infeasible points.
struct CovarianceFactors {
  std::vector<Matrix> q;  ///< q[k]: n-by-n lower triangular
  std::vector<Matrix> r;  ///< r[k]: m(k)-by-m(k) lower triangular
  Vector vdiag;           ///< diagonal of V, interleaved layout
  bool in_domain = false;
};

namespace detail {

inline void check_lower_triangular(const Matrix& L, int k, const char* name) {
  const int d = static_cast<int>(L.rows());
  double upper = 0.0, scale = 1.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      scale = std::max(scale, std::abs(L(i, j)));
      if (j > i) upper = std::max(upper, std::abs(L(i, j)));
    }
  if (upper > 1e-10 * scale)
    throw DimensionMismatch(std::string(name) +
                            ": factor not lower triangular at step " +
                            std::to_string(k));
}

}  // namespace detail

inline CovarianceFactors factor_V(const StateSpaceModel& model,
                                  const StateSequence& x) {
  detail::check_state(model, x, "factor_V");
  const auto lay = InterleavedLayout::of(model);
  const int n = model.n;
  CovarianceFactors fac;
  fac.q.reserve(model.N);
  fac.r.reserve(model.N);
  fac.vdiag.resize(lay.total);
  for (int k = 0; k < model.N; ++k) {
    const auto xk = x.segment(k * n, n);
    Matrix Lq = detail::callback_mat(model.qfac, k + 1, xk, n, n, "qfac");
    Matrix Lr = detail::callback_mat(model.rfac, k + 1, xk, model.m[k],
                                     model.m[k], "rfac");
    detail::check_lower_triangular(Lq, k + 1, "qfac");
    detail::check_lower_triangular(Lr, k + 1, "rfac");
    fac.vdiag.segment(lay.proc[k], n) = Lq.diagonal();
    fac.vdiag.segment(lay.meas[k], model.m[k]) = Lr.diagonal();
    fac.q.push_back(std::move(Lq));
    fac.r.push_back(std::move(Lr));
  }
  fac.in_domain = fac.vdiag.allFinite() && (fac.vdiag.array() > 0.0).all();
  return fac;
}

/// Jacobian of residual_c, stored by its nonzero blocks: identity on each
/// process diagonal, H_k on measurement rows, -G_k on the process row below.
struct ResidualJacobian {
  int n = 0, N = 0;
  std::vector<int> m;
  std::vector<Matrix> G;  ///< G[k] = dg/dx at step k+1 (0-based, k >= 1)
  std::vector<Matrix> H;  ///< H[k] = dh/dx at step k+1

  Vector apply(const Vector& v) const {
    const InterleavedLayout lay(n, N, m);
    if (v.size() != n * N)
      throw DimensionMismatch("residual jacobian apply: vector length");
    Vector out(lay.total);
    for (int k = 0; k < N; ++k) {
      const auto vk = v.segment(k * n, n);
      out.segment(lay.proc[k], n) = vk;
      if (k > 0) out.segment(lay.proc[k], n) -= G[k] * v.segment((k - 1) * n, n);
      out.segment(lay.meas[k], m[k]) = H[k] * vk;
    }
    return out;
  }
};

inline ResidualJacobian jacobian_c(const StateSpaceModel& model,
                                   const StateSequence& x) {
  detail::check_state(model, x, "jacobian_c");
  const int n = model.n;
  ResidualJacobian J;
  J.n = n;
  J.N = model.N;
  J.m = model.m;
  J.G.resize(model.N);
  J.H.resize(model.N);
  for (int k = 0; k < model.N; ++k) {
    if (k > 0)
      J.G[k] = detail::callback_mat(model.G, k + 1, x.segment((k - 1) * n, n),
                                    n, n, "G");
    J.H[k] = detail::callback_mat(model.H, k + 1, x.segment(k * n, n),
                                  model.m[k], n, "H");
  }
  return J;
}

/// Replaces the analytic factor-derivative callbacks with central finite
/// differences of qfac/rfac. Prototyping aid; analytic derivatives keep the
/// Gauss-Newton model exact and should be preferred.
inline StateSpaceModel with_fd_covariance_derivatives(StateSpaceModel model,
                                                      double step = 1e-7) {
  const int n = model.n;
  auto fd = [step](const std::function<Matrix(int, const Vector&)>& f, int k,
                   const Vector& x, int rows, int n_state) {
    std::vector<Matrix> D(rows, Matrix::Zero(rows, n_state));
    for (int p = 0; p < n_state; ++p) {
      const double hp = step * (1.0 + std::abs(x(p)));
      Vector xp = x, xm = x;
      xp(p) += hp;
      xm(p) -= hp;
      const Matrix Fp = f(k, xp);
      const Matrix Fm = f(k, xm);
      for (int j = 0; j < rows; ++j)
        D[j].col(p) = (Fp.row(j) - Fm.row(j)).transpose() / (2.0 * hp);
    }
    return D;
  };
  auto qf = model.qfac;
  model.qfac_deriv = [qf, fd, n](int k, const Vector& x) {
    return fd(qf, k, x, n, n);
  };
  auto rf = model.rfac;
  auto mdim = model.m;
  model.rfac_deriv = [rf, fd, mdim, n](int k, const Vector& x) {
    return fd(rf, k, x, mdim[k - 1], n);
  };
  return model;
}

}  // namespace eks
