#pragma once

#include "minimax/polynomial.hpp"
#include "minimax/types.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace minimax {

// A point of the inner feasible set. Finite-list entries carry their list
// index (coords may be 0-dimensional for abstract labels); box points carry
// coordinates only and index = -1.
struct XiPoint {
  int index = -1;
  Vector coords;

  static XiPoint listed(int i, Vector c = Vector()) { return {i, std::move(c)}; }
  static XiPoint at(Vector c) { return {-1, std::move(c)}; }
};

struct FiniteList {
  std::vector<Vector> points;        // all the same dimension m (possibly 0)
  std::vector<std::string> labels;   // same length as points
};

struct XiSet {
  enum class Kind { finite_list, box };
  Kind kind = Kind::finite_list;
  FiniteList list;
  Box box;

  Index count() const {
    return kind == Kind::finite_list ? static_cast<Index>(list.points.size()) : -1;
  }
};

// Known optima and limit quantities for the builtin problems; literal data,
// used by tests and by the "analytic" covariance source.
struct GroundTruth {
  bool known = false;
  Vector gamma_star;
  Real theta_star = 0.0;
  std::vector<int> active_indices;      // finite-list case
  std::vector<Vector> active_points;    // box case
  Vector lambda_star;
  Matrix sigma_solution;                // covariance of stacked active gradients (nk x nk)
  Matrix cov_value;                     // covariance of active branch values (k x k)
  bool local_minimizer_condition = true;  // directional-derivative formula applies
  bool degenerate_k_n_plus_1 = false;
};

// Per-sample integrand with joint (gamma, xi) derivatives.
class FOracle {
 public:
  virtual ~FOracle() = default;
  virtual Real value(const Vector& x, const Vector& gamma, const XiPoint& xi) const = 0;
  virtual Vector gradient(const Vector& x, const Vector& gamma, const XiPoint& xi) const = 0;
  virtual Matrix hessian(const Vector& x, const Vector& gamma, const XiPoint& xi) const = 0;
};

struct ProblemSpec {
  std::string name;
  Index n = 0;  // outer dimension
  Index m = 0;  // inner dimension (0 for labeled finite lists)
  Index d = 0;  // data dimension
  Box gamma_set;
  XiSet xi_set;

  // Exactly one representation is used:
  //  - branch_polys: one polynomial in gamma per finite-list entry (m = 0),
  //  - shared_poly: one polynomial in (gamma, xi) for boxes or coordinate lists.
  std::vector<Polynomial> branch_polys;
  std::optional<Polynomial> shared_poly;

  GroundTruth truth;

  bool finite() const { return xi_set.kind == XiSet::Kind::finite_list; }
  Index branch_count() const { return xi_set.count(); }
  const Polynomial& poly_for(const XiPoint& xi) const;
  Vector xi_coords(const XiPoint& xi) const;  // coords for shared_poly evaluation
  XiPoint list_point(int i) const;

  const FOracle& oracle() const;

  void validate() const;  // dimension/shape consistency

 private:
  mutable std::shared_ptr<FOracle> oracle_;
};

// Registry of builtin problems. Accepts "smooth_saddle(b)" style parameters;
// unknown names raise InvalidArgument listing the available names.
ProblemSpec make_builtin(const std::string& name);
std::vector<std::string> builtin_names();

struct Dataset {
  Matrix draws;  // N x d
  std::uint64_t seed = 0;
  bool from_sampler = false;

  Index N() const { return draws.rows(); }
  Index dim() const { return draws.cols(); }
};

// Draw j of the problem's data distribution (iid standard normal components),
// stream mix(seed, j).
Vector sample_x(const ProblemSpec& problem, std::uint64_t seed, std::uint64_t index);
Dataset sample_dataset(const ProblemSpec& problem, Index N, std::uint64_t seed);

// f (population) and f-hat (empirical) with block derivatives.
class Objective {
 public:
  explicit Objective(const ProblemSpec& problem) : problem_(&problem) {}
  virtual ~Objective() = default;

  const ProblemSpec& problem() const { return *problem_; }
  Index n() const { return problem_->n; }
  Index m() const { return problem_->m; }

  virtual Real value(const Vector& gamma, const XiPoint& xi) const = 0;
  virtual Vector joint_gradient(const Vector& gamma, const XiPoint& xi) const = 0;
  virtual Matrix joint_hessian(const Vector& gamma, const XiPoint& xi) const = 0;

  Vector gamma_gradient(const Vector& gamma, const XiPoint& xi) const;
  Vector xi_gradient(const Vector& gamma, const XiPoint& xi) const;
  Matrix gamma_hessian(const Vector& gamma, const XiPoint& xi) const;
  Matrix xi_hessian(const Vector& gamma, const XiPoint& xi) const;
  Matrix cross_hessian(const Vector& gamma, const XiPoint& xi) const;  // n x m

 private:
  const ProblemSpec* problem_;
};

class PopulationObjective : public Objective {
 public:
  explicit PopulationObjective(const ProblemSpec& problem);
  Real value(const Vector& gamma, const XiPoint& xi) const override;
  Vector joint_gradient(const Vector& gamma, const XiPoint& xi) const override;
  Matrix joint_hessian(const Vector& gamma, const XiPoint& xi) const override;

 private:
  std::vector<Polynomial> polys_;  // per branch, or single shared at [0]
};

class EmpiricalObjective : public Objective {
 public:
  EmpiricalObjective(const ProblemSpec& problem, const Dataset& data);

  Real value(const Vector& gamma, const XiPoint& xi) const override;
  Vector joint_gradient(const Vector& gamma, const XiPoint& xi) const override;
  Matrix joint_hessian(const Vector& gamma, const XiPoint& xi) const override;

  // Reference path: pairwise mean of per-row F values. Equals value() up to
  // reassociation of the same sum.
  Real value_rowwise(const Vector& gamma, const XiPoint& xi) const;
  Vector gradient_rowwise(const Vector& gamma, const XiPoint& xi) const;

  const Vector& data_means() const { return means_; }
  const Dataset& data() const { return *data_; }

 private:
  const Dataset* data_;
  Vector means_;
  std::vector<Polynomial> collapsed_;
};

struct GradientCheckReport {
  int points = 0;
  Real max_gradient_error = 0.0;
  Real max_hessian_error = 0.0;
  bool pass = false;
};

// Central finite differences (step 1e-4 * (1 + |coordinate|)) of the
// per-sample oracle against its analytic derivatives at random interior
// points; errors relative to 1 + |value|. Pass threshold 1e-5.
GradientCheckReport check_gradients(const ProblemSpec& problem, int num_points,
                                    std::uint64_t seed);
GradientCheckReport check_gradients(const ProblemSpec& problem, const FOracle& oracle,
                                    int num_points, std::uint64_t seed);

}  // namespace minimax
