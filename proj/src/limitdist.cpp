#include "minimax/limitdist.hpp"

#include "minimax/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace minimax {

namespace {

constexpr Real kInf = std::numeric_limits<Real>::infinity();

void require_square(const Matrix& m, Index dim, const char* what) {
  if (m.rows() != dim || m.cols() != dim)
    throw InvalidArgument(std::string(what) + ": expected " + std::to_string(dim) + "x" +
                          std::to_string(dim) + ", got " + std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()));
}

// Eigendecomposition square root with the documented clipping rule: values
// below -1e-8 are an error, values in (-1e-8, 0) clip to zero.
Matrix clipped_factor(const Matrix& cov, const char* what) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (cov + cov.transpose()));
  Vector vals = eig.eigenvalues();
  for (Index i = 0; i < vals.size(); ++i) {
    if (vals(i) < -1e-8)
      throw NumericalError(std::string(what) + ": covariance has eigenvalue " +
                           std::to_string(vals(i)) + " below -1e-8");
    vals(i) = std::max(vals(i), 0.0);
  }
  return eig.eigenvectors() * vals.cwiseSqrt().asDiagonal();
}

Matrix sample_covariance(const Matrix& rows) {
  const Index n_rows = rows.rows();
  if (n_rows < 2) throw InvalidArgument("sample covariance needs at least two rows");
  Vector mu = column_means(rows);
  Matrix centered = rows.rowwise() - mu.transpose();
  return (centered.transpose() * centered) / static_cast<Real>(n_rows - 1);
}

}  // namespace

std::string to_string(LimitMode m) {
  switch (m) {
    case LimitMode::qp_sampler: return "qp_sampler";
    case LimitMode::gaussian_strict_complementarity: return "gaussian_strict_complementarity";
    case LimitMode::sandwich_k1: return "sandwich_k1";
    case LimitMode::degenerate_zero: return "degenerate_zero";
  }
  return "unknown";
}

std::string to_string(CovarianceSource s) {
  return s == CovarianceSource::analytic ? "analytic" : "plugin";
}

std::string to_string(ValueLimitModel::Mode m) {
  return m == ValueLimitModel::Mode::gaussian_scalar ? "gaussian_scalar" : "min_sup_mixture";
}

Matrix sigma_solution(const ProblemSpec& problem, const Vector& gamma_star,
                      const std::vector<ActivePoint>& active, CovarianceSource source,
                      const Dataset* data) {
  const Index n = problem.n;
  const Index k = static_cast<Index>(active.size());
  if (k == 0) throw InvalidArgument("sigma_solution: empty active set");

  if (source == CovarianceSource::analytic) {
    if (!problem.truth.known)
      throw InvalidArgument("sigma_solution: problem '" + problem.name +
                            "' has no analytic covariance; use the plugin source");
    const Matrix& s = problem.truth.sigma_solution;
    if (s.rows() != n * k)
      throw InvalidArgument("sigma_solution: analytic covariance is " +
                            std::to_string(s.rows()) + "x" + std::to_string(s.cols()) +
                            " but the detected active set implies " + std::to_string(n * k));
    if (!problem.truth.active_indices.empty()) {
      for (Index i = 0; i < k; ++i)
        if (active[static_cast<std::size_t>(i)].xi.index !=
            problem.truth.active_indices[static_cast<std::size_t>(i)])
          throw InvalidArgument("sigma_solution: detected active set does not match the "
                                "problem's known active set");
    }
    return s;
  }

  if (data == nullptr)
    throw InvalidArgument("sigma_solution: plugin source requires a dataset");
  const auto& oracle = problem.oracle();
  Matrix rows(data->N(), n * k);
  for (Index j = 0; j < data->N(); ++j) {
    const Vector x = data->draws.row(j).transpose();
    for (Index i = 0; i < k; ++i)
      rows.row(j).segment(i * n, n) =
          oracle.gradient(x, gamma_star, active[static_cast<std::size_t>(i)].xi).head(n);
  }
  return sample_covariance(rows);
}

Matrix cov_value_matrix(const ProblemSpec& problem, const Vector& gamma_star,
                        const std::vector<ActivePoint>& active, CovarianceSource source,
                        const Dataset* data) {
  const Index k = static_cast<Index>(active.size());
  if (k == 0) throw InvalidArgument("cov_value_matrix: empty active set");
  if (source == CovarianceSource::analytic) {
    if (!problem.truth.known)
      throw InvalidArgument("cov_value_matrix: problem '" + problem.name +
                            "' has no analytic covariance; use the plugin source");
    const Matrix& c = problem.truth.cov_value;
    if (c.rows() != k)
      throw InvalidArgument("cov_value_matrix: analytic covariance size does not match "
                            "the detected active set");
    return c;
  }
  if (data == nullptr)
    throw InvalidArgument("cov_value_matrix: plugin source requires a dataset");
  const auto& oracle = problem.oracle();
  Matrix rows(data->N(), k);
  for (Index j = 0; j < data->N(); ++j) {
    const Vector x = data->draws.row(j).transpose();
    for (Index i = 0; i < k; ++i)
      rows(j, i) = oracle.value(x, gamma_star, active[static_cast<std::size_t>(i)].xi);
  }
  return sample_covariance(rows);
}

SolutionLimitModel solution_limit_model(const ProblemSpec& problem,
                                        const ReductionData& reduction, const Matrix& sigma,
                                        bool force_qp) {
  if (reduction.certificates.empty())
    throw InvalidArgument("solution_limit_model: reduction carries no certificates; "
                          "run reduce_problem first");
  static const char* required[] = {"finite_active_set",     "inner_stationarity",
                                   "inner_hessian_nonsingular", "affine_independence",
                                   "unique_multipliers",    "second_order_strict",
                                   "second_order_critical_sampled"};
  std::string failing;
  for (const char* name : required)
    if (!reduction.certificate_passes(name)) failing += std::string(failing.empty() ? "" : ", ") + name;
  if (!failing.empty())
    throw AssumptionViolation("solution limit law unavailable; failing certificates: " + failing);

  const Index n = problem.n;
  const Index k = reduction.k();
  require_square(sigma, n * k, "solution_limit_model: Sigma");
  if ((sigma - sigma.transpose()).lpNorm<Eigen::Infinity>() >
      1e-9 * (1.0 + sigma.lpNorm<Eigen::Infinity>()))
    throw InvalidArgument("solution_limit_model: Sigma is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (sigma + sigma.transpose()));
  if (eig.eigenvalues().minCoeff() < -1e-8)
    throw NumericalError("solution_limit_model: Sigma has eigenvalue below -1e-8");

  SolutionLimitModel model;
  model.reduction = reduction;
  model.sigma = sigma;
  const bool trivial_subspace = reduction.index_sets.L_basis.cols() == 0;
  if (force_qp) {
    model.mode = LimitMode::qp_sampler;
  } else if (k == 1) {
    model.mode = LimitMode::sandwich_k1;
  } else if (reduction.strict_complementarity && trivial_subspace) {
    model.mode = LimitMode::degenerate_zero;
  } else if (reduction.strict_complementarity) {
    model.mode = LimitMode::gaussian_strict_complementarity;
  } else {
    model.mode = LimitMode::qp_sampler;
  }
  if (model.mode != LimitMode::qp_sampler)
    model.gaussian_cov = gaussian_solution_limit(reduction, sigma);
  return model;
}

Vector qp_eta(const ReductionData& reduction, const Vector& z) {
  if (!reduction.multipliers.unique)
    throw InvalidArgument("qp_eta: the limit QP requires unique optimality weights");
  const Index n = reduction.n();
  const Index k = reduction.k();
  if (z.size() != n * k)
    throw InvalidArgument("qp_eta: z has size " + std::to_string(z.size()) +
                          ", expected n*k = " + std::to_string(n * k));
  const auto& iz = reduction.index_sets.I_zero;
  const auto& ip = reduction.index_sets.I_plus;
  if (static_cast<Index>(iz.size()) > 20)
    throw CapabilityError("qp_eta: active-set enumeration supports at most 20 inactive "
                          "constraints, got " + std::to_string(iz.size()));

  const Vector& lambda = reduction.multipliers.lambda;
  Vector y = Vector::Zero(n);
  for (Index i = 0; i < k; ++i) y += lambda(i) * z.segment(i * n, n);
  const Matrix& h = reduction.H;
  const auto grads = reduction.gradients();

  const Real feas_tol = 1e-9;
  Real best_obj = kInf;
  Vector best_eta;
  bool found = false;

  std::vector<int> subset;
  auto try_subset = [&](const std::vector<int>& s_set) {
    std::vector<int> eq(ip);
    for (int j : s_set) eq.push_back(iz[static_cast<std::size_t>(j)]);
    Matrix a(static_cast<Index>(eq.size()), n);
    for (std::size_t r = 0; r < eq.size(); ++r)
      a.row(static_cast<Index>(r)) = grads[static_cast<std::size_t>(eq[r])].transpose();

    Vector eta;
    if (a.rows() == 0) {
      Eigen::LLT<Matrix> llt(h);
      if (llt.info() != Eigen::Success) return;
      eta = llt.solve(-y);
    } else {
      Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullV);
      const Real smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
      const Real thresh = 1e-8 * std::max(1.0, smax);
      Index rank = 0;
      for (Index i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > thresh) ++rank;
      const Matrix nb = svd.matrixV().rightCols(n - rank);
      if (nb.cols() == 0) {
        eta = Vector::Zero(n);
      } else {
        Eigen::LLT<Matrix> llt(Matrix(nb.transpose() * h * nb));
        if (llt.info() != Eigen::Success) return;  // not convex on this face
        eta = nb * llt.solve(Vector(-nb.transpose() * y));
      }
    }

    // primal feasibility on the constraints not forced active
    for (std::size_t j = 0; j < iz.size(); ++j) {
      const Real v = eta.dot(grads[static_cast<std::size_t>(iz[j])]);
      if (v > feas_tol * (1.0 + eta.norm())) return;
    }
    for (int i : ip)
      if (std::abs(eta.dot(grads[static_cast<std::size_t>(i)])) > feas_tol * (1.0 + eta.norm()))
        return;

    // multipliers for the forced-active constraints
    if (!eq.empty()) {
      Matrix g(n, static_cast<Index>(eq.size()));
      for (std::size_t c = 0; c < eq.size(); ++c)
        g.col(static_cast<Index>(c)) = grads[static_cast<std::size_t>(eq[c])];
      const Vector target = -(h * eta + y);
      Vector mu = g.completeOrthogonalDecomposition().solve(target);
      if ((g * mu - target).norm() > feas_tol * (1.0 + target.norm())) return;
      for (std::size_t c = ip.size(); c < eq.size(); ++c)
        if (mu(static_cast<Index>(c)) < -1e-9) return;  // dual infeasible
    } else {
      if ((h * eta + y).norm() > feas_tol * (1.0 + y.norm())) return;
    }

    const Real obj = eta.dot(y) + 0.5 * eta.dot(h * eta);
    if (!found || obj < best_obj) {
      found = true;
      best_obj = obj;
      best_eta = eta;
    }
  };

  const int nz = static_cast<int>(iz.size());
  for (int size = 0; size <= nz; ++size) {
    std::vector<int> idx(static_cast<std::size_t>(size));
    for (int i = 0; i < size; ++i) idx[static_cast<std::size_t>(i)] = i;
    bool more = true;
    while (more) {
      try_subset(idx);
      int pos = size - 1;
      while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == nz - (size - pos)) --pos;
      if (pos < 0) {
        more = false;
      } else {
        ++idx[static_cast<std::size_t>(pos)];
        for (int j = pos + 1; j < size; ++j)
          idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
      }
      if (size == 0) more = false;
    }
  }

  if (!found)
    throw NumericalError("qp_eta: no active subset yields a feasible KKT point; the "
                         "reduction certificates are inconsistent with the QP");
  return best_eta;
}

Matrix sandwich_cov(const Matrix& h, const Matrix& sigma) {
  require_square(sigma, h.rows(), "sandwich_cov: Sigma");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (h + h.transpose()));
  const Vector abs_e = eig.eigenvalues().cwiseAbs();
  if (abs_e.minCoeff() <= 0.0 || abs_e.maxCoeff() / abs_e.minCoeff() > 1e12)
    throw AssumptionViolation("sandwich covariance undefined: the reduced curvature "
                              "matrix is numerically singular");
  const Matrix hinv =
      eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
      eig.eigenvectors().transpose();
  Matrix out = hinv * sigma * hinv;
  return 0.5 * (out + out.transpose());
}

Matrix block_solution_cov(const Matrix& h, const Matrix& a, const Matrix& cov_y) {
  const Index n = h.rows();
  const Index q = a.cols();
  require_square(cov_y, n, "block_solution_cov: Cov[Y]");
  if (a.rows() != n && q != 0)
    throw InvalidArgument("block_solution_cov: constraint matrix has wrong row count");
  Matrix b = Matrix::Zero(n + q, n + q);
  b.topLeftCorner(n, n) = h;
  if (q > 0) {
    b.topRightCorner(n, q) = a;
    b.bottomLeftCorner(q, n) = a.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (b + b.transpose()));
  const Vector abs_e = eig.eigenvalues().cwiseAbs();
  if (abs_e.minCoeff() <= 0.0 || abs_e.maxCoeff() / abs_e.minCoeff() > 1e12)
    throw AssumptionViolation("limit covariance undefined: the bordered optimality "
                              "system is singular (affine independence of the active "
                              "gradients or second-order sufficiency fails)");
  const Matrix binv =
      eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
      eig.eigenvectors().transpose();
  Matrix d = Matrix::Zero(n + q, n + q);
  d.topLeftCorner(n, n) = cov_y;
  const Matrix m = binv * d * binv;
  Matrix out = m.topLeftCorner(n, n);
  return 0.5 * (out + out.transpose());
}

Matrix gaussian_solution_limit(const ReductionData& reduction, const Matrix& sigma) {
  if (!reduction.multipliers.unique)
    throw InvalidArgument("gaussian_solution_limit: requires unique optimality weights");
  const Index n = reduction.n();
  const Index k = reduction.k();
  require_square(sigma, n * k, "gaussian_solution_limit: Sigma");
  if (k == 1) return sandwich_cov(reduction.H, sigma);
  if (!reduction.strict_complementarity)
    throw AssumptionViolation("gaussian_solution_limit: strict complementarity fails; "
                              "use the QP sampler instead");
  if (reduction.index_sets.L_basis.cols() == 0) return Matrix::Zero(n, n);

  const Vector& lambda = reduction.multipliers.lambda;
  Matrix cov_y = Matrix::Zero(n, n);
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < k; ++j)
      cov_y += lambda(i) * lambda(j) * sigma.block(i * n, j * n, n, n);

  const auto grads = reduction.gradients();
  Matrix a(n, k - 1);
  for (Index i = 0; i + 1 < k; ++i) a.col(i) = grads[static_cast<std::size_t>(i)];
  return block_solution_cov(reduction.H, a, cov_y);
}

Matrix sample_gaussian_draws(const Matrix& cov, Index S, std::uint64_t seed) {
  const Index n = cov.rows();
  const Matrix factor = clipped_factor(cov, "sample_gaussian_draws");
  Matrix out(S, n);
  for (Index s = 0; s < S; ++s) {
    rng::CounterStream stream(rng::mix(seed, static_cast<std::uint64_t>(s)));
    Vector w(n);
    for (Index j = 0; j < n; ++j) w(j) = stream.normal(static_cast<std::uint64_t>(j));
    out.row(s) = (factor * w).transpose();
  }
  return out;
}

Matrix sample_solution_limit(const SolutionLimitModel& model, Index S, std::uint64_t seed) {
  if (model.mode != LimitMode::qp_sampler)
    throw InvalidArgument("sample_solution_limit: model mode is " + to_string(model.mode) +
                          "; closed-form modes sample with sample_gaussian_draws");
  const Index n = model.reduction.n();
  const Index p = model.sigma.rows();
  const Matrix factor = clipped_factor(model.sigma, "sample_solution_limit");
  Matrix out(S, n);
  for (Index s = 0; s < S; ++s) {
    rng::CounterStream stream(rng::mix(seed, static_cast<std::uint64_t>(s)));
    Vector w(p);
    for (Index j = 0; j < p; ++j) w(j) = stream.normal(static_cast<std::uint64_t>(j));
    try {
      out.row(s) = qp_eta(model.reduction, factor * w).transpose();
    } catch (const Error& e) {
      throw NumericalError("sample_solution_limit: draw " + std::to_string(s) + ": " +
                           e.what());
    }
  }
  return out;
}

namespace {

class QuadraticModelFamily : public BranchFamily {
 public:
  QuadraticModelFamily(const ReductionData& rd, const Vector& z) : rd_(&rd) {
    const Index n = rd.n();
    for (Index i = 0; i < rd.k(); ++i)
      shifted_.push_back(rd.phi[static_cast<std::size_t>(i)].grad + z.segment(i * n, n));
  }
  int count() const override { return static_cast<int>(rd_->k()); }
  Real value(const Vector& x, int i) override {
    const auto& hess = rd_->phi[static_cast<std::size_t>(i)].hess;
    return x.dot(shifted_[static_cast<std::size_t>(i)]) + 0.5 * x.dot(hess * x);
  }
  BranchEval eval(const Vector& x, int i) override {
    const auto& hess = rd_->phi[static_cast<std::size_t>(i)].hess;
    BranchEval out;
    out.value = value(x, i);
    out.grad = shifted_[static_cast<std::size_t>(i)] + hess * x;
    out.hess = hess;
    return out;
  }

 private:
  const ReductionData* rd_;
  std::vector<Vector> shifted_;
};

}  // namespace

Vector solve_quadratic_model(const ReductionData& reduction, const Vector& z, Real radius) {
  if (!(radius > 0.0)) throw InvalidArgument("solve_quadratic_model: radius must be positive");
  const Index n = reduction.n();
  if (z.size() != n * reduction.k())
    throw InvalidArgument("solve_quadratic_model: z has wrong size");
  QuadraticModelFamily family(reduction, z);
  EpigraphResult res = epigraph_minimize(family, Vector::Zero(n));
  if (!res.converged)
    throw NumericalError("solve_quadratic_model: epigraph Newton did not converge");
  if (res.x.norm() >= radius)
    throw DomainError("solve_quadratic_model: minimizer reached the trust radius " +
                      std::to_string(radius) + "; radius too small for this z");
  return res.x;
}

ValueLimitModel value_limit_model(const ProblemSpec& problem,
                                  const std::vector<ReductionData>& reductions,
                                  CovarianceSource source, const Dataset* data) {
  if (reductions.empty())
    throw InvalidArgument("value_limit_model: need at least one minimizer");
  ValueLimitModel model;
  model.source = source;
  Index pairs = 0;
  for (const auto& rd : reductions) {
    ValueMinimizer vm;
    vm.gamma_star = rd.gamma_star;
    vm.active = rd.active;
    vm.unique_lambda = rd.multipliers.unique;
    if (vm.unique_lambda)
      vm.lambda = rd.multipliers.lambda;
    else
      vm.vertices = rd.multipliers.vertices;
    pairs += rd.k();
    model.minimizers.push_back(std::move(vm));
  }

  if (source == CovarianceSource::analytic) {
    if (reductions.size() != 1)
      throw CapabilityError("value_limit_model: analytic covariance supports a single "
                            "listed minimizer");
    model.covF = cov_value_matrix(problem, reductions[0].gamma_star, reductions[0].active,
                                  source, data);
  } else {
    if (data == nullptr)
      throw InvalidArgument("value_limit_model: plugin source requires a dataset");
    const auto& oracle = problem.oracle();
    Matrix rows(data->N(), pairs);
    for (Index j = 0; j < data->N(); ++j) {
      const Vector x = data->draws.row(j).transpose();
      Index c = 0;
      for (const auto& rd : reductions)
        for (const auto& p : rd.active)
          rows(j, c++) = oracle.value(x, rd.gamma_star, p.xi);
    }
    model.covF = sample_covariance(rows);
  }

  if (model.minimizers.size() == 1 && model.minimizers[0].unique_lambda) {
    model.mode = ValueLimitModel::Mode::gaussian_scalar;
    model.sigma2 = sigma_value(model.covF, model.minimizers[0].lambda);
  } else {
    model.mode = ValueLimitModel::Mode::min_sup_mixture;
  }
  return model;
}

Real sigma_value(const Matrix& covF, const Vector& lambda) {
  require_square(covF, lambda.size(), "sigma_value: covF");
  return lambda.dot(covF * lambda);
}

Vector sample_value_limit(const ValueLimitModel& model, Index S, std::uint64_t seed) {
  Vector out(S);
  if (model.mode == ValueLimitModel::Mode::gaussian_scalar) {
    const Real sd = std::sqrt(std::max(model.sigma2, 0.0));
    for (Index s = 0; s < S; ++s) {
      rng::CounterStream stream(rng::mix(seed, static_cast<std::uint64_t>(s)));
      out(s) = sd * stream.normal(0);
    }
    return out;
  }

  const Index p = model.covF.rows();
  const Matrix factor = clipped_factor(model.covF, "sample_value_limit");
  for (Index s = 0; s < S; ++s) {
    rng::CounterStream stream(rng::mix(seed, static_cast<std::uint64_t>(s)));
    Vector w(p);
    for (Index j = 0; j < p; ++j) w(j) = stream.normal(static_cast<std::uint64_t>(j));
    const Vector f = factor * w;
    Real best = kInf;
    Index offset = 0;
    for (const auto& vm : model.minimizers) {
      const Index k = static_cast<Index>(vm.active.size());
      const Vector block = f.segment(offset, k);
      Real v;
      if (vm.unique_lambda) {
        v = vm.lambda.dot(block);
      } else {
        v = -kInf;
        for (Index r = 0; r < vm.vertices.rows(); ++r)
          v = std::max(v, vm.vertices.row(r).dot(block));
      }
      best = std::min(best, v);
      offset += k;
    }
    out(s) = best;
  }
  return out;
}

}  // namespace minimax
