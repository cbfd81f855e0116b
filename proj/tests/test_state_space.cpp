#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "eks/experiment.hpp"
#include "eks/state_space_model.hpp"
#include "support/oracles.hpp"
#include "support/random_models.hpp"

using eks::Matrix;
using eks::StateSequence;
using eks::StateSpaceModel;
using eks::Vector;

namespace {

/// Scalar model with identity measurement, zero prior and measurements,
/// and configurable constant factors.
StateSpaceModel scalar_identity_model(int N, double qf = 1.0, double rf = 1.0) {
  StateSpaceModel m;
  m.N = N;
  m.n = 1;
  m.m.assign(N, 1);
  m.g0 = Vector::Zero(1);
  m.z.assign(N, Vector::Zero(1));
  m.g = [](int, const Vector& x) { return x; };
  m.G = [](int, const Vector&) { return Matrix::Identity(1, 1); };
  m.h = [](int, const Vector& x) { return x; };
  m.H = [](int, const Vector&) { return Matrix::Identity(1, 1); };
  m.qfac = [qf](int, const Vector&) { return Matrix::Constant(1, 1, qf); };
  m.rfac = [rf](int, const Vector&) { return Matrix::Constant(1, 1, rf); };
  m.qfac_deriv = [](int, const Vector&) {
    return std::vector<Matrix>{Matrix::Zero(1, 1)};
  };
  m.rfac_deriv = [](int, const Vector&) {
    return std::vector<Matrix>{Matrix::Zero(1, 1)};
  };
  return m;
}

}  // namespace

TEST_CASE("interleaved layout offsets") {
  const eks::InterleavedLayout lay(2, 2, {1, 2});
  CHECK(lay.proc == std::vector<int>{0, 3});
  CHECK(lay.meas == std::vector<int>{2, 5});
  CHECK(lay.total == 7);
  CHECK(lay.M == 3);
}

TEST_CASE("residual of the scalar identity model") {
  const auto model = scalar_identity_model(1);
  const Vector c = eks::residual_c(model, Vector::Constant(1, 1.0));
  REQUIRE(c.size() == 2);
  CHECK(c[0] == 1.0);  // x1 - g0
  CHECK(c[1] == 1.0);  // h(x1) - z1
}

TEST_CASE("identity dynamics on a constant sequence leave no process residual") {
  const auto model = scalar_identity_model(4);
  StateSequence x = Vector::Constant(4, 3.25);
  const Vector c = eks::residual_c(model, x);
  const auto lay = eks::InterleavedLayout::of(model);
  CHECK(c[lay.proc[0]] == 3.25);  // first block measures distance to g0 = 0
  for (int k = 1; k < 4; ++k) CHECK(c[lay.proc[k]] == 0.0);
}

TEST_CASE("tracking model process residuals are the discretization error") {
  eks::ExperimentConfig cfg;
  cfg.N = 50;
  const auto data = eks::simulate(cfg);
  const auto model = eks::build_tracking_model(cfg, data.z);
  const Vector c = eks::residual_c(model, data.truth);
  const auto lay = eks::InterleavedLayout::of(model);
  const double dt = (cfg.t_end - cfg.t_begin) / (cfg.N - 1);
  for (int k = 1; k < cfg.N; ++k) {
    const double t_prev = cfg.t_begin + dt * (k - 1);
    const double t_cur = t_prev + dt;
    // First state component: truth minus its held-over previous value.
    const double expected = 2.0 * std::cos(t_prev) - 2.0 * std::cos(t_cur);
    CHECK(c[lay.proc[k]] == Catch::Approx(expected).margin(1e-12));
  }
}

TEST_CASE("residual is linear in the measurements") {
  eks::NormalSampler rng(3);
  auto model = eks::test::random_smooth_model(rng, 2, 4);
  const StateSequence x = eks::test::random_state(rng, 2, 4);
  const Vector c_base = eks::residual_c(model, x);
  std::vector<Vector> shift;
  for (int k = 0; k < 4; ++k)
    shift.push_back(eks::test::random_vector(rng, model.m[k], 1.0));
  for (int k = 0; k < 4; ++k) model.z[k] += shift[k];
  const Vector c_shifted = eks::residual_c(model, x);
  const auto lay = eks::InterleavedLayout::of(model);
  for (int k = 0; k < 4; ++k) {
    CHECK((c_shifted.segment(lay.proc[k], 2) - c_base.segment(lay.proc[k], 2))
              .norm() == 0.0);
    CHECK((c_shifted.segment(lay.meas[k], model.m[k]) -
           c_base.segment(lay.meas[k], model.m[k]) + shift[k])
              .lpNorm<Eigen::Infinity>() < 1e-15);
  }
}

TEST_CASE("factor_V collects diagonals and the domain flag") {
  SECTION("identity factors") {
    const auto model = scalar_identity_model(3);
    const auto fac = eks::factor_V(model, Vector::Zero(3));
    CHECK(fac.in_domain);
    CHECK(fac.vdiag.isApprox(Vector::Ones(6)));
  }
  SECTION("tracking model inside and outside the domain") {
    eks::ExperimentConfig cfg;
    cfg.N = 3;
    const auto data = eks::simulate(cfg);
    const auto model = eks::build_tracking_model(cfg, data.z);
    StateSequence x = Vector::Zero(6);
    x[0] = -1.0;  // rfac = 3 - (-1) = 4, i.e. variance 1/16
    auto fac = eks::factor_V(model, x);
    const auto lay = eks::InterleavedLayout::of(model);
    CHECK(fac.in_domain);
    CHECK(fac.vdiag[lay.meas[0]] == 4.0);
    CHECK(1.0 / (fac.vdiag[lay.meas[0]] * fac.vdiag[lay.meas[0]]) ==
          Catch::Approx(1.0 / 16.0));

    x[2] = 3.5;  // second step: diagonal entry 3 - 3.5 < 0
    fac = eks::factor_V(model, x);
    CHECK_FALSE(fac.in_domain);
    CHECK(fac.vdiag[lay.meas[1]] == Catch::Approx(-0.5));
  }
}

TEST_CASE("factors must be lower triangular") {
  eks::NormalSampler rng(1);
  auto bad = eks::test::random_smooth_model(rng, 2, 2);
  bad.qfac = [](int, const Vector&) {
    Matrix M(2, 2);
    M << 1.0, 0.5, 0.0, 1.0;
    return M;
  };
  CHECK_THROWS_AS(eks::factor_V(bad, Vector::Zero(4)),
                  eks::DimensionMismatch);
}

TEST_CASE("residual jacobian places the dynamics blocks") {
  auto model = scalar_identity_model(2);
  model.g = [](int, const Vector& x) -> Vector { return 2.0 * x; };
  model.G = [](int, const Vector&) { return Matrix::Constant(1, 1, 2.0); };
  const auto J = eks::jacobian_c(model, Vector::Ones(2));
  CHECK(J.G[1](0, 0) == 2.0);
  // Column images: block below the diagonal carries -G.
  Vector e1 = Vector::Zero(2);
  e1[0] = 1.0;
  const Vector col = J.apply(e1);
  const auto lay = eks::InterleavedLayout::of(model);
  CHECK(col[lay.proc[0]] == 1.0);
  CHECK(col[lay.proc[1]] == -2.0);
  CHECK(col[lay.meas[0]] == 1.0);
  CHECK(col[lay.meas[1]] == 0.0);
}

TEST_CASE("residual jacobian matches finite differences") {
  eks::NormalSampler rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 1 + trial % 3;
    const int N = 2 + trial;
    const auto model = eks::test::random_smooth_model(rng, n, N);
    const StateSequence x = eks::test::random_state(rng, n, N);
    const auto J = eks::jacobian_c(model, x);
    const Matrix fd = eks::test::fd_jacobian(
        [&](const Vector& xx) { return eks::residual_c(model, xx); }, x);
    Matrix dense(fd.rows(), fd.cols());
    for (int i = 0; i < fd.cols(); ++i) {
      Vector e = Vector::Zero(fd.cols());
      e[i] = 1.0;
      dense.col(i) = J.apply(e);
    }
    CHECK((dense - fd).lpNorm<Eigen::Infinity>() <
          1e-5 * (1.0 + fd.lpNorm<Eigen::Infinity>()));
  }
}

TEST_CASE("factor derivative tensors match finite differences") {
  eks::NormalSampler rng(23);
  const auto model = eks::test::random_smooth_model(rng, 3, 3);
  const Vector xk = eks::test::random_vector(rng, 3, 0.7);
  for (int k = 1; k <= 3; ++k) {
    const auto Dq = model.qfac_deriv(k, xk);
    for (int p = 0; p < 3; ++p) {
      const double h = 1e-6 * (1.0 + std::abs(xk[p]));
      Vector xp = xk, xm = xk;
      xp[p] += h;
      xm[p] -= h;
      const Matrix diff = (model.qfac(k, xp) - model.qfac(k, xm)) / (2.0 * h);
      for (int j = 0; j < 3; ++j)
        for (int l = 0; l < 3; ++l)
          CHECK(Dq[j](l, p) == Catch::Approx(diff(j, l)).margin(1e-6));
    }
  }
}

TEST_CASE("finite-difference fallback reproduces analytic factor derivatives") {
  eks::NormalSampler rng(29);
  const auto model = eks::test::random_smooth_model(rng, 2, 3);
  const auto fd_model = eks::with_fd_covariance_derivatives(model);
  const Vector xk = eks::test::random_vector(rng, 2, 0.5);
  const auto Dq = model.qfac_deriv(2, xk);
  const auto Dq_fd = fd_model.qfac_deriv(2, xk);
  const auto Dr = model.rfac_deriv(2, xk);
  const auto Dr_fd = fd_model.rfac_deriv(2, xk);
  for (std::size_t j = 0; j < Dq.size(); ++j)
    CHECK((Dq[j] - Dq_fd[j]).lpNorm<Eigen::Infinity>() < 1e-7);
  for (std::size_t j = 0; j < Dr.size(); ++j)
    CHECK((Dr[j] - Dr_fd[j]).lpNorm<Eigen::Infinity>() < 1e-7);
}

TEST_CASE("dimension validation") {
  const auto model = scalar_identity_model(3);
  CHECK_THROWS_AS(eks::residual_c(model, Vector::Zero(2)),
                  eks::DimensionMismatch);
  auto bad = model;
  bad.z.pop_back();
  CHECK_THROWS_AS(eks::residual_c(bad, Vector::Zero(3)),
                  eks::DimensionMismatch);
  auto bad_h = model;
  bad_h.h = [](int, const Vector&) { return Vector::Zero(2); };
  CHECK_THROWS_AS(eks::residual_c(bad_h, Vector::Zero(3)),
                  eks::DimensionMismatch);
}
