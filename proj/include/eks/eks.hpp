#pragma once

// Umbrella header for the extended Kalman smoother library: estimation
// under state-dependent noise by generalized Gauss-Newton iteration over
// barrier-regularized block-tridiagonal subproblems, plus the classic
// filter/smoother baselines and the simulation harness.

#include "eks/block_tridiagonal.hpp"
#include "eks/classic.hpp"
#include "eks/errors.hpp"
#include "eks/experiment.hpp"
#include "eks/ggn.hpp"
#include "eks/objective.hpp"
#include "eks/rng.hpp"
#include "eks/state_space_model.hpp"
#include "eks/subproblem.hpp"
#include "eks/types.hpp"
