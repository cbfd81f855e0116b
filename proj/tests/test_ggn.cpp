#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "eks/classic.hpp"
#include "eks/experiment.hpp"
#include "eks/ggn.hpp"
#include "support/random_models.hpp"

using eks::GgnConfig;
using eks::SmootherStatus;
using eks::StateSequence;
using eks::Vector;

namespace {

struct TrackingSetup {
  eks::StateSpaceModel model;
  StateSequence x0;
};

TrackingSetup tracking_setup(int N, unsigned long long seed) {
  eks::ExperimentConfig cfg;
  cfg.N = N;
  cfg.seed = seed;
  const auto data = eks::simulate(cfg);
  TrackingSetup s{eks::build_tracking_model(cfg, data.z), {}};
  s.x0 = eks::initial_iterate(s.model);
  return s;
}

}  // namespace

TEST_CASE("constant-factor problems finish in a single outer iteration") {
  eks::NormalSampler rng(83);
  std::vector<Vector> z;
  const auto linear = eks::test::random_linear_gaussian(rng, 2, 20, &z);
  const auto model = eks::to_state_space(linear, z);

  GgnConfig cfg;
  cfg.omega = 1e-8;
  const auto sol = eks::smooth(model, Vector::Zero(40), cfg);

  CHECK(sol.status == SmootherStatus::Converged);
  REQUIRE(sol.trace.size() == 1);
  CHECK(sol.trace[0].step == 1.0);
  CHECK(sol.trace[0].trials == 1);

  const auto rts = eks::rts_smooth(linear, z);
  for (int k = 0; k < 20; ++k)
    CHECK((sol.x_final.segment(2 * k, 2) - rts.mean[k])
              .lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("restarting at the solution terminates immediately") {
  const auto setup = tracking_setup(60, 0);
  GgnConfig cfg;
  // Pin the threshold: left unset it scales with the objective at each
  // run's own starting point, which is far smaller at the solution.
  cfg.epsilon = 1e-8;
  const auto sol = eks::smooth(setup.model, setup.x0, cfg);
  REQUIRE(sol.status == SmootherStatus::Converged);

  const auto again = eks::smooth(setup.model, sol.x_final, cfg);
  CHECK(again.status == SmootherStatus::Converged);
  CHECK(again.trace.empty());
  CHECK((again.x_final - sol.x_final).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("tracking problem converges with a strictly decreasing objective") {
  const auto setup = tracking_setup(100, 0);
  GgnConfig cfg;
  const auto sol = eks::smooth(setup.model, setup.x0, cfg);

  REQUIRE(sol.status == SmootherStatus::Converged);
  CHECK(sol.trace.size() <= 50);
  for (size_t i = 0; i + 1 < sol.trace.size(); ++i)
    CHECK(sol.trace[i + 1].K < sol.trace[i].K);
  if (!sol.trace.empty()) {
    CHECK(sol.K_final < sol.trace.back().K);
    CHECK(std::isfinite(sol.K_final));
  }

  // Accepted steps are exact powers of the shrink factor in (0, 1].
  for (const auto& rec : sol.trace) {
    CHECK(rec.step > 0.0);
    CHECK(rec.step <= 1.0);
    const double exponent = std::log(rec.step) / std::log(cfg.gamma);
    CHECK(std::abs(exponent - std::round(exponent)) < 1e-12);
    CHECK(rec.trials == static_cast<int>(std::round(exponent)) + 1);
    CHECK(rec.delta < 0.0);
  }
}

TEST_CASE("every truncated run stays inside the factor domain") {
  const auto setup = tracking_setup(80, 3);
  GgnConfig cfg;
  const auto full = eks::smooth(setup.model, setup.x0, cfg);
  REQUIRE(full.status == SmootherStatus::Converged);
  const int total = static_cast<int>(full.trace.size());
  REQUIRE(total >= 2);

  for (int cap = 0; cap <= total; ++cap) {
    GgnConfig truncated = cfg;
    truncated.max_outer = cap;
    const auto sol = eks::smooth(setup.model, setup.x0, truncated);
    CHECK(eks::eval_K(setup.model, sol.x_final).in_domain);
    if (cap < total)
      CHECK(sol.status == SmootherStatus::MaxIterations);
    CHECK(static_cast<int>(sol.trace.size()) == std::min(cap, total));
  }
}

TEST_CASE("convergence certifies a short remaining direction") {
  const auto setup = tracking_setup(50, 7);
  GgnConfig cfg;
  cfg.epsilon = 1e-9;
  const auto sol = eks::smooth(setup.model, setup.x0, cfg);
  REQUIRE(sol.status == SmootherStatus::Converged);
  CHECK(sol.delta_final >= -1e-9);

  // delta <= -omega/2 ||d||^2, so the certified bound on the direction
  // that would have been taken next is ||d|| <= sqrt(2 epsilon / omega).
  const auto sub = eks::assemble_subproblem(setup.model, sol.x_final, cfg.omega);
  const auto dir = eks::solve_subproblem(sub, cfg.inner);
  CHECK(dir.delta >= -1e-9);
  CHECK(dir.triple.d.norm() <= std::sqrt(2.0 * 1e-9 / cfg.omega) + 1e-12);
}

TEST_CASE("smoothing a random smooth model decreases the objective") {
  eks::NormalSampler rng(89);
  const auto model = eks::test::random_smooth_model(rng, 2, 12);
  const StateSequence x0 = eks::test::random_state(rng, 2, 12);
  GgnConfig cfg;
  const auto sol = eks::smooth(model, x0, cfg);
  CHECK(sol.status == SmootherStatus::Converged);
  CHECK(sol.K_final <= eks::eval_K(model, x0).K);
}

TEST_CASE("configuration validation") {
  const auto setup = tracking_setup(10, 1);
  auto expect_invalid = [&](GgnConfig bad) {
    CHECK_THROWS_AS(eks::smooth(setup.model, setup.x0, bad),
                    std::invalid_argument);
  };
  GgnConfig cfg;

  auto c = cfg;
  c.omega = 0.0;
  expect_invalid(c);
  c = cfg;
  c.omega = -1.0;
  expect_invalid(c);
  c = cfg;
  c.beta = 0.0;
  expect_invalid(c);
  c = cfg;
  c.beta = 1.0;
  expect_invalid(c);
  c = cfg;
  c.gamma = 0.0;
  expect_invalid(c);
  c = cfg;
  c.gamma = 1.0;
  expect_invalid(c);
  c = cfg;
  c.max_outer = -1;
  expect_invalid(c);
  c = cfg;
  c.epsilon = -1e-3;
  expect_invalid(c);
}

TEST_CASE("zero outer iterations return the start unchanged") {
  const auto setup = tracking_setup(10, 2);
  GgnConfig cfg;
  cfg.max_outer = 0;
  const auto sol = eks::smooth(setup.model, setup.x0, cfg);
  CHECK(sol.status == SmootherStatus::MaxIterations);
  CHECK(sol.trace.empty());
  CHECK((sol.x_final - setup.x0).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(sol.K_final ==
        Catch::Approx(eks::eval_K(setup.model, setup.x0).K));
}

TEST_CASE("out-of-domain starting points are rejected") {
  const auto setup = tracking_setup(10, 4);
  StateSequence bad = setup.x0;
  bad[0] = 5.0;  // measurement factor 3 - x1 turns negative
  CHECK_THROWS_AS(eks::smooth(setup.model, bad, GgnConfig{}),
                  eks::InfeasibleStart);
}

TEST_CASE("status names") {
  CHECK(std::string(to_string(SmootherStatus::Converged)) == "Converged");
  CHECK(std::string(to_string(SmootherStatus::MaxIterations)) ==
        "MaxIterations");
  CHECK(std::string(to_string(SmootherStatus::LineSearchStalled)) ==
        "LineSearchStalled");
}
