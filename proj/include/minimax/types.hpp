#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace minimax {

using Real = double;
using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr const char* kVersion = "0.1.0";

// Error taxonomy. The CLI maps ConfigError to exit code 2 and every other
// subclass to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Supported-size or supported-case limits (e.g. inequality sets too large to
// enumerate, vertex enumeration beyond k = 6).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

// Point outside the feasible box / finite list.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A regularity condition required by the requested computation fails at the
// given problem data (singular inner Hessian, dependent gradients, ...).
class AssumptionViolation : public Error {
 public:
  using Error::Error;
};

// Factorization or conditioning failures.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct Box {
  Vector lower;
  Vector upper;

  Index dim() const { return lower.size(); }

  bool contains(const Vector& p, Real tol = 0.0) const {
    if (p.size() != dim()) return false;
    return (p.array() >= lower.array() - tol).all() &&
           (p.array() <= upper.array() + tol).all();
  }

  // Minimum over faces of the distance to the boundary; negative outside.
  Real boundary_distance(const Vector& p) const {
    Real d = std::numeric_limits<Real>::infinity();
    for (Index i = 0; i < dim(); ++i) {
      d = std::min(d, std::min(p[i] - lower[i], upper[i] - p[i]));
    }
    return d;
  }

  Vector project(const Vector& p) const {
    return p.cwiseMax(lower).cwiseMin(upper);
  }

  Real diameter() const { return (upper - lower).norm(); }

  Vector center() const { return 0.5 * (lower + upper); }
};

inline Box make_box(Index dim, Real lo, Real hi) {
  Box b;
  b.lower = Vector::Constant(dim, lo);
  b.upper = Vector::Constant(dim, hi);
  return b;
}

// Index-ascending pairwise summation; the fixed accumulation order makes
// empirical means reproducible bit-for-bit regardless of thread count.
Real pairwise_sum(const Real* data, Index size);

inline Real pairwise_mean(const Real* data, Index size) {
  if (size == 0) throw InvalidArgument("pairwise_mean: empty range");
  return pairwise_sum(data, size) / static_cast<Real>(size);
}

Real pairwise_mean(const Vector& v);

// Column means of a row-major-logical sample matrix (draw per row).
Vector column_means(const Matrix& draws);

}  // namespace minimax
