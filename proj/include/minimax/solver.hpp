#pragma once

#include "minimax/problem.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace minimax {

struct InnerPoint {
  XiPoint xi;
  Real value = 0.0;
};

struct InnerOptions {
  int max_iterations = 200;
  Real gradient_tol = 1e-10;
  Real merge_radius = 1e-6;
  int grid_cap = 243;
};

// All local maximizers of xi -> objective(gamma, xi) found by multi-start
// projected Newton ascent (finite lists are enumerated exactly), cluster
// representatives only, sorted by value descending; ties broken by list index,
// then lexicographic coordinates.
std::vector<InnerPoint> inner_maximize(const Objective& objective, const Vector& gamma,
                                       const InnerOptions& options = {});

enum class SolveStatus { converged, max_iter, boundary_hit };

std::string to_string(SolveStatus s);

struct SourceTag {
  enum class Kind { population, sample };
  Kind kind = Kind::population;
  Index N = 0;
  std::uint64_t seed = 0;
  bool synthetic = false;  // dataset not produced by the problem sampler
};

struct MinimaxSolution {
  Vector gamma_hat;
  Real theta_hat = 0.0;
  std::vector<InnerPoint> inner_maximizers;  // value-sorted, global max first
  SolveStatus status = SolveStatus::max_iter;
  int iterations = 0;
  Real kkt_residual = std::numeric_limits<Real>::infinity();
  SourceTag source;
};

struct OuterOptions {
  int grid_cap = 729;
  int subgradient_steps = 500;
  Real kkt_tol = 1e-9;
  Real boundary_tol = 1e-7;
  Real tau_act = 1e-5;  // scaled by 1 + |phi|
  int max_active_set_ops = 30;
  InnerOptions inner;
};

MinimaxSolution outer_minimize(const Objective& objective, const OuterOptions& options = {});

MinimaxSolution solve_population(const ProblemSpec& problem, const OuterOptions& options = {});
MinimaxSolution solve_sample(const ProblemSpec& problem, const Dataset& data,
                             const OuterOptions& options = {});

// Direction of perturbation of the objective: one polynomial per finite-list
// branch, or a shared polynomial in (gamma, xi).
struct Perturbation {
  std::vector<Polynomial> branch;
  std::optional<Polynomial> shared;

  static Perturbation constants(const ProblemSpec& problem, const std::vector<Real>& values);
  Real eval(const ProblemSpec& problem, const Vector& gamma, const XiPoint& xi) const;
};

struct DirDerivEstimate {
  std::vector<Real> t_grid;
  std::vector<Real> quotients;  // (V(f + t eta) - V(f)) / t
  Real base_value = 0.0;        // V(f)
  Real estimate = 0.0;          // Richardson extrapolation of the last two quotients
  bool monotone = false;
};

std::vector<Real> default_dirderiv_grid();

// One-sided difference quotients of the optimal value along eta, each computed
// by a full re-solve of the perturbed population problem.
DirDerivEstimate value_dirderiv_fd(const ProblemSpec& problem, const Perturbation& eta,
                                   const std::vector<Real>& t_grid = default_dirderiv_grid(),
                                   const OuterOptions& options = {});

// Shared epigraph active-set Newton core. Branches are a fixed finite family
// i = 0..count-1 with values/gradients/Hessians supplied by the callback;
// minimizes max_i branch_i(x) from x0, managing the active set internally.
struct BranchEval {
  Real value = 0.0;
  Vector grad;
  Matrix hess;
};

class BranchFamily {
 public:
  virtual ~BranchFamily() = default;
  virtual int count() const = 0;
  virtual Real value(const Vector& x, int i) = 0;
  virtual BranchEval eval(const Vector& x, int i) = 0;
};

struct EpigraphResult {
  Vector x;
  Real value = 0.0;
  std::vector<int> active;
  Vector lambda;  // per active branch
  Real residual = std::numeric_limits<Real>::infinity();
  int iterations = 0;
  bool converged = false;
};

EpigraphResult epigraph_minimize(BranchFamily& branches, const Vector& x0,
                                 Real kkt_tol = 1e-9, Real tau_act = 1e-5,
                                 int max_active_set_ops = 30);

}  // namespace minimax
