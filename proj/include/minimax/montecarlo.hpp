#pragma once

#include "minimax/solver.hpp"

#include <string>
#include <utility>
#include <vector>

namespace minimax {

struct ReplicationSet {
  std::string problem_id;
  Index N = 0;
  Index R = 0;
  std::uint64_t master_seed = 0;
  Matrix scaled_gamma_errors;  // R x n, sqrt(N) (gamma_hat - gamma*)
  Vector scaled_value_errors;  // R, sqrt(N) (theta_hat - theta*)
  std::vector<SolveStatus> statuses;
  Index exact_recovery_count = 0;  // |gamma_hat - gamma*| <= 1e-9 sqrt(n)
  Index converged_count = 0;

  Matrix converged_gamma_errors() const;
  Vector converged_value_errors() const;
};

// Replication r solves the sample problem with dataset seed mix(master_seed, r).
// Deterministic in all arguments and in the thread count; errors if more than
// 5% of replications fail to converge.
ReplicationSet run_replications(const ProblemSpec& problem, Index N, Index R,
                                std::uint64_t master_seed, int threads = 1,
                                const OuterOptions& options = {});

// Exact two-sample Kolmogorov-Smirnov statistic (sorted merge, ties handled).
Real ks_statistic(const Vector& a, const Vector& b);

struct CompareThresholds {
  Real ks = 0.06;
  bool check_mean = false;
  Real mean_tol = 0.05;
  bool check_variance = false;
  Real var_lo = 0.0;
  Real var_hi = std::numeric_limits<Real>::infinity();
  bool check_zero_mass = false;
  Real zero_lo = 0.0;
  Real zero_hi = 1.0;
  Real zero_eps = 1e-9;
};

struct ScalarComparison {
  std::string label;
  Index n_empirical = 0;
  Index n_theoretical = 0;
  Real ks = 0.0;
  Real mean_empirical = 0.0;
  Real mean_theoretical = 0.0;
  Real var_empirical = 0.0;
  Real var_theoretical = 0.0;
  Real zero_mass_empirical = 0.0;
  Real zero_mass_theoretical = 0.0;
  bool pass = false;
  std::string failure;  // first threshold clause that failed, empty if none
};

struct ComparisonReport {
  std::vector<ScalarComparison> columns;
  bool pass = false;
};

// Column c of `empirical` against column c of `theoretical`; thresholds apply
// to every column. Labels default to col0, col1, ...
ComparisonReport compare_distributions(const Matrix& empirical, const Matrix& theoretical,
                                       const CompareThresholds& thresholds,
                                       const std::vector<std::string>& labels = {});

// Coordinates of the rows of `errors` in the given orthonormal basis and in an
// orthonormal completion of it: (R x dim, R x (n - dim)).
std::pair<Matrix, Matrix> project_errors(const Matrix& errors, const Matrix& L_basis);

}  // namespace minimax
