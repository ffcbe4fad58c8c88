#pragma once

#include "minimax/reduction.hpp"

namespace minimax {

enum class LimitMode { qp_sampler, gaussian_strict_complementarity, sandwich_k1, degenerate_zero };
std::string to_string(LimitMode m);

enum class CovarianceSource { analytic, plugin };
std::string to_string(CovarianceSource s);

// Covariance of the stacked gamma-gradients of F at the active points
// (nk x nk). analytic reads the problem's known value; plugin takes the
// sample covariance (divisor N-1) of the per-row gradients. Evaluation at an
// estimated point rather than the true optimum is the caller's choice and is
// flagged on the model, not here.
Matrix sigma_solution(const ProblemSpec& problem, const Vector& gamma_star,
                      const std::vector<ActivePoint>& active, CovarianceSource source,
                      const Dataset* data = nullptr);

// Covariance of the F-values at the listed (gamma*, xi_i*) pairs.
Matrix cov_value_matrix(const ProblemSpec& problem, const Vector& gamma_star,
                        const std::vector<ActivePoint>& active, CovarianceSource source,
                        const Dataset* data = nullptr);

struct SolutionLimitModel {
  LimitMode mode = LimitMode::qp_sampler;
  ReductionData reduction;
  Matrix sigma;         // nk x nk stacked-gradient covariance
  Matrix gaussian_cov;  // n x n, empty in qp_sampler mode
  CovarianceSource sigma_source = CovarianceSource::analytic;
  bool plug_in_point = false;  // sigma evaluated at an estimate of gamma*
};

// Classifies the limit law from the reduction certificates and precomputes
// the closed-form covariance where one exists. force_qp keeps the sampler
// representation even when a Gaussian form is available.
SolutionLimitModel solution_limit_model(const ProblemSpec& problem,
                                        const ReductionData& reduction, const Matrix& sigma,
                                        bool force_qp = false);

// Minimizer of eta'Y + eta'H eta / 2 over {eta'grad_i = 0 on I_plus,
// <= 0 on I_zero}, Y = sum_i lambda_i z_i, by exhaustive enumeration of the
// active inequality subset. z stacks one n-block per active point.
Vector qp_eta(const ReductionData& reduction, const Vector& z);

// Closed-form n x n limit covariance: k=1 sandwich, trivial-subspace zero, or
// the bordered system [[H, A], [A', 0]] with A holding the first k-1 branch
// gradients. Requires strict complementarity (or k=1).
Matrix gaussian_solution_limit(const ReductionData& reduction, const Matrix& sigma);

// Building blocks, exposed for direct testing.
Matrix sandwich_cov(const Matrix& h, const Matrix& sigma);
Matrix block_solution_cov(const Matrix& h, const Matrix& a, const Matrix& cov_y);

// S x n matrix of limit-law draws through the QP map; requires qp_sampler
// mode. Draw s uses stream mix(seed, s).
Matrix sample_solution_limit(const SolutionLimitModel& model, Index S, std::uint64_t seed);

// S x n draws of N(0, cov) by eigendecomposition factor; eigenvalues in
// (-1e-8, 0) clip to zero, below that is an error.
Matrix sample_gaussian_draws(const Matrix& cov, Index S, std::uint64_t seed);

// Reference oracle for qp_eta: minimizes the local quadratic model
// max_i [delta'(grad_i + z_i) + delta'hess_i delta / 2] with the epigraph
// active-set Newton. The minimizer must fall strictly inside the given
// radius; hitting the boundary is an error (radius too small).
Vector solve_quadratic_model(const ReductionData& reduction, const Vector& z, Real radius);

struct ValueMinimizer {
  Vector gamma_star;
  std::vector<ActivePoint> active;
  bool unique_lambda = false;
  Vector lambda;
  Matrix vertices;  // one multiplier vector per row when not unique
};

struct ValueLimitModel {
  enum class Mode { gaussian_scalar, min_sup_mixture };
  Mode mode = Mode::gaussian_scalar;
  std::vector<ValueMinimizer> minimizers;
  Matrix covF;        // over all listed (gamma*, xi_i*) pairs, minimizer-major
  Real sigma2 = 0.0;  // gaussian_scalar only
  CovarianceSource source = CovarianceSource::analytic;
  bool plug_in_point = false;
};

std::string to_string(ValueLimitModel::Mode m);

// analytic covF supports a single listed minimizer (the built-in ground
// truth); plugin composes the joint covariance across all pairs.
ValueLimitModel value_limit_model(const ProblemSpec& problem,
                                  const std::vector<ReductionData>& reductions,
                                  CovarianceSource source, const Dataset* data = nullptr);

Real sigma_value(const Matrix& covF, const Vector& lambda);

// S draws of the scalar value limit: min over minimizers of the weighted
// Gaussian form (unique lambda) or of the max over multiplier vertices.
Vector sample_value_limit(const ValueLimitModel& model, Index S, std::uint64_t seed);

}  // namespace minimax
