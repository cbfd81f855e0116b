#pragma once

#include <stdexcept>
#include <string>

namespace eks {

/// Inputs whose shapes do not line up (vector lengths, block sizes,
/// callback outputs).
class DimensionMismatch : public std::invalid_argument {
 public:
  explicit DimensionMismatch(const std::string& what)
      : std::invalid_argument(what) {}
};

/// A Cholesky pivot failed. `block` is the 1-based index of the offending
/// diagonal block (or time step, for filter innovation covariances).
class NotPositiveDefinite : public std::runtime_error {
 public:
  NotPositiveDefinite(const std::string& what, int block_index)
      : std::runtime_error(what + " (block " + std::to_string(block_index) + ")"),
        block(block_index) {}
  int block;
};

/// The state has a non-positive covariance-factor diagonal entry, so the
/// objective is +infinity there.
class OutOfDomain : public std::runtime_error {
 public:
  explicit OutOfDomain(const std::string& what) : std::runtime_error(what) {}
};

/// The linearized factor diagonal is non-positive at the requested
/// direction, so the model decrease is undefined.
class LinearizedDomainViolation : public std::runtime_error {
 public:
  explicit LinearizedDomainViolation(const std::string& what)
      : std::runtime_error(what) {}
};

/// The initial iterate handed to the smoother is outside the objective's
/// domain.
class InfeasibleStart : public std::runtime_error {
 public:
  explicit InfeasibleStart(const std::string& what)
      : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace eks
