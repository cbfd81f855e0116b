#pragma once

#include <memory>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>

#include "eks/state_space_model.hpp"

namespace eks {

/// Linear state-space model with state-independent Gaussian noise. A[k]
/// maps step k-1 to step k and is unused at k = 0, where the prior mean g0
/// with covariance Q[0] takes its place. All indices are 0-based steps.
struct LinearGaussianModel {
  int N = 0;
  int n = 0;
  std::vector<int> m;
  std::vector<Matrix> A;
  std::vector<Matrix> Q;
  std::vector<Matrix> H;
  std::vector<Matrix> R;
  Vector g0;
};

/// Per-step Gaussian state estimates.
struct GaussianSequence {
  std::vector<Vector> mean;
  std::vector<Matrix> cov;
};

namespace detail {

inline void check_linear_model(const LinearGaussianModel& model,
                               const std::vector<Vector>& z,
                               const char* where) {
  const int N = model.N, n = model.n;
  auto fail = [&](const char* what) {
    throw DimensionMismatch(std::string(where) + ": " + what);
  };
  if (N <= 0 || n <= 0) fail("empty model");
  if (static_cast<int>(model.m.size()) != N) fail("m size");
  if (static_cast<int>(model.A.size()) != N) fail("A size");
  if (static_cast<int>(model.Q.size()) != N) fail("Q size");
  if (static_cast<int>(model.H.size()) != N) fail("H size");
  if (static_cast<int>(model.R.size()) != N) fail("R size");
  if (static_cast<int>(z.size()) != N) fail("z size");
  if (model.g0.size() != n) fail("g0 length");
  for (int k = 0; k < N; ++k) {
    if (k > 0 && (model.A[k].rows() != n || model.A[k].cols() != n))
      fail("transition shape");
    if (model.Q[k].rows() != n || model.Q[k].cols() != n) fail("Q shape");
    if (model.H[k].rows() != model.m[k] || model.H[k].cols() != n)
      fail("H shape");
    if (model.R[k].rows() != model.m[k] || model.R[k].cols() != model.m[k])
      fail("R shape");
    if (z[k].size() != model.m[k]) fail("measurement length");
  }
}

struct FilterPasses {
  GaussianSequence filtered;
  GaussianSequence predicted;  ///< one-step-ahead moments, same indexing
};

inline FilterPasses filter_passes(const LinearGaussianModel& model,
                                  const std::vector<Vector>& z) {
  check_linear_model(model, z, "kalman_filter");
  const int N = model.N, n = model.n;
  FilterPasses out;
  out.filtered.mean.resize(N);
  out.filtered.cov.resize(N);
  out.predicted.mean.resize(N);
  out.predicted.cov.resize(N);

  Vector mp = model.g0;
  Matrix Pp = model.Q[0];
  const Matrix I = Matrix::Identity(n, n);
  for (int k = 0; k < N; ++k) {
    if (k > 0) {
      mp = model.A[k] * out.filtered.mean[k - 1];
      Pp = model.A[k] * out.filtered.cov[k - 1] * model.A[k].transpose() +
           model.Q[k];
    }
    out.predicted.mean[k] = mp;
    out.predicted.cov[k] = Pp;

    const Matrix& Hk = model.H[k];
    const Matrix S = Hk * Pp * Hk.transpose() + model.R[k];
    Eigen::LLT<Matrix> llt(S);
    if (llt.info() != Eigen::Success)
      throw NotPositiveDefinite("kalman_filter: innovation covariance", k + 1);
    const Matrix K = llt.solve(Hk * Pp.transpose()).transpose();
    const Vector innov = z[k] - Hk * mp;
    out.filtered.mean[k] = mp + K * innov;
    // Joseph form keeps the updated covariance symmetric positive definite
    // even when the gain is nearly singular.
    const Matrix J = I - K * Hk;
    out.filtered.cov[k] =
        J * Pp * J.transpose() + K * model.R[k] * K.transpose();
  }
  return out;
}

}  // namespace detail

inline GaussianSequence kalman_filter(const LinearGaussianModel& model,
                                      const std::vector<Vector>& z) {
  return detail::filter_passes(model, z).filtered;
}

/// Fixed-interval smoother: a Kalman forward pass followed by the
/// Rauch-Tung-Striebel backward recursion. The smoothed mean sequence
/// minimizes the quadratic objective
///   1/2 (x_1-g0)' Q_1^{-1} (x_1-g0)
///   + 1/2 sum_k (x_k - A_k x_{k-1})' Q_k^{-1} (...)
///   + 1/2 sum_k (z_k - H_k x_k)' R_k^{-1} (...).
inline GaussianSequence rts_smooth(const LinearGaussianModel& model,
                                   const std::vector<Vector>& z) {
  const auto passes = detail::filter_passes(model, z);
  const int N = model.N;
  GaussianSequence out;
  out.mean.resize(N);
  out.cov.resize(N);
  out.mean[N - 1] = passes.filtered.mean[N - 1];
  out.cov[N - 1] = passes.filtered.cov[N - 1];
  for (int k = N - 2; k >= 0; --k) {
    Eigen::LLT<Matrix> llt(passes.predicted.cov[k + 1]);
    if (llt.info() != Eigen::Success)
      throw NotPositiveDefinite("rts_smooth: predicted covariance", k + 2);
    const Matrix G =
        llt.solve(model.A[k + 1] * passes.filtered.cov[k].transpose())
            .transpose();
    out.mean[k] = passes.filtered.mean[k] +
                  G * (out.mean[k + 1] - passes.predicted.mean[k + 1]);
    out.cov[k] = passes.filtered.cov[k] +
                 G * (out.cov[k + 1] - passes.predicted.cov[k + 1]) *
                     G.transpose();
  }
  return out;
}

/// Lowers a linear-Gaussian model to the state-dependent interface with
/// constant covariance factors (inverse Cholesky factors of Q and R) and
/// zero factor derivatives, for running the iterated smoother on it.
inline StateSpaceModel to_state_space(const LinearGaussianModel& model,
                                      const std::vector<Vector>& z) {
  detail::check_linear_model(model, z, "to_state_space");
  const int n = model.n;
  auto inverse_cholesky = [](const Matrix& C, const char* what, int k) {
    Eigen::LLT<Matrix> llt(C);
    if (llt.info() != Eigen::Success) throw NotPositiveDefinite(what, k);
    Matrix L = llt.matrixL();
    return Matrix(L.triangularView<Eigen::Lower>().solve(
        Matrix::Identity(C.rows(), C.cols())));
  };
  auto qf = std::make_shared<std::vector<Matrix>>();
  auto rf = std::make_shared<std::vector<Matrix>>();
  for (int k = 0; k < model.N; ++k) {
    qf->push_back(inverse_cholesky(model.Q[k], "to_state_space: Q", k + 1));
    rf->push_back(inverse_cholesky(model.R[k], "to_state_space: R", k + 1));
  }
  auto A = std::make_shared<std::vector<Matrix>>(model.A);
  auto H = std::make_shared<std::vector<Matrix>>(model.H);

  StateSpaceModel out;
  out.N = model.N;
  out.n = n;
  out.m = model.m;
  out.g0 = model.g0;
  out.z = z;
  out.g = [A](int k, const Vector& x) -> Vector { return (*A)[k - 1] * x; };
  out.G = [A](int k, const Vector&) -> Matrix { return (*A)[k - 1]; };
  out.h = [H](int k, const Vector& x) -> Vector { return (*H)[k - 1] * x; };
  out.H = [H](int k, const Vector&) -> Matrix { return (*H)[k - 1]; };
  out.qfac = [qf](int k, const Vector&) -> Matrix { return (*qf)[k - 1]; };
  out.rfac = [rf](int k, const Vector&) -> Matrix { return (*rf)[k - 1]; };
  out.qfac_deriv = [n](int, const Vector&) {
    return std::vector<Matrix>(n, Matrix::Zero(n, n));
  };
  out.rfac_deriv = [rf, n](int k, const Vector&) {
    const int mk = static_cast<int>((*rf)[k - 1].rows());
    return std::vector<Matrix>(mk, Matrix::Zero(mk, n));
  };
  return out;
}

}  // namespace eks
