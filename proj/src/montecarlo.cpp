#include "minimax/montecarlo.hpp"

#include "minimax/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

namespace minimax {

namespace {

// Dynamic scheduling; each index writes only its own slot, so the result is
// independent of the thread count and interleaving.
void parallel_for(Index count, int threads, const std::function<void(Index)>& body) {
  threads = std::max(1, threads);
  if (threads == 1 || count <= 1) {
    for (Index i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<Index> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const Index i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const int spawn = static_cast<int>(std::min<Index>(threads, count));
  pool.reserve(static_cast<std::size_t>(spawn));
  for (int t = 0; t < spawn; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

Real sample_mean(const Vector& v) { return pairwise_mean(v); }

Real sample_variance(const Vector& v) {
  if (v.size() < 2) return 0.0;
  const Real mu = sample_mean(v);
  Vector sq = (v.array() - mu).square().matrix();
  return pairwise_sum(sq.data(), sq.size()) / static_cast<Real>(v.size() - 1);
}

}  // namespace

Matrix ReplicationSet::converged_gamma_errors() const {
  Matrix out(converged_count, scaled_gamma_errors.cols());
  Index w = 0;
  for (Index r = 0; r < R; ++r)
    if (statuses[static_cast<std::size_t>(r)] == SolveStatus::converged)
      out.row(w++) = scaled_gamma_errors.row(r);
  return out;
}

Vector ReplicationSet::converged_value_errors() const {
  Vector out(converged_count);
  Index w = 0;
  for (Index r = 0; r < R; ++r)
    if (statuses[static_cast<std::size_t>(r)] == SolveStatus::converged)
      out(w++) = scaled_value_errors(r);
  return out;
}

ReplicationSet run_replications(const ProblemSpec& problem, Index N, Index R,
                                std::uint64_t master_seed, int threads,
                                const OuterOptions& options) {
  if (R < 1) throw InvalidArgument("run_replications: R must be at least 1");
  if (N < 1) throw InvalidArgument("run_replications: N must be at least 1");
  if (!problem.truth.known)
    throw InvalidArgument("run_replications: problem '" + problem.name +
                          "' has no known optimum to measure errors against");

  const Index n = problem.n;
  const Real root_n = std::sqrt(static_cast<Real>(N));
  ReplicationSet set;
  set.problem_id = problem.name;
  set.N = N;
  set.R = R;
  set.master_seed = master_seed;
  set.scaled_gamma_errors = Matrix::Zero(R, n);
  set.scaled_value_errors = Vector::Zero(R);
  set.statuses.assign(static_cast<std::size_t>(R), SolveStatus::max_iter);

  std::vector<char> recovered(static_cast<std::size_t>(R), 0);
  parallel_for(R, threads, [&](Index r) {
    const Dataset data =
        sample_dataset(problem, N, rng::mix(master_seed, static_cast<std::uint64_t>(r)));
    const MinimaxSolution sol = solve_sample(problem, data, options);
    const Vector gamma_err = sol.gamma_hat - problem.truth.gamma_star;
    set.scaled_gamma_errors.row(r) = (root_n * gamma_err).transpose();
    set.scaled_value_errors(r) = root_n * (sol.theta_hat - problem.truth.theta_star);
    set.statuses[static_cast<std::size_t>(r)] = sol.status;
    if (gamma_err.norm() <= 1e-9 * std::sqrt(static_cast<Real>(n)))
      recovered[static_cast<std::size_t>(r)] = 1;
  });

  for (Index r = 0; r < R; ++r) {
    if (set.statuses[static_cast<std::size_t>(r)] == SolveStatus::converged)
      ++set.converged_count;
    if (recovered[static_cast<std::size_t>(r)]) ++set.exact_recovery_count;
  }
  const Index failed = R - set.converged_count;
  if (20 * failed > R)
    throw NumericalError("run_replications: " + std::to_string(failed) + " of " +
                         std::to_string(R) + " replications failed to converge (> 5%)");
  return set;
}

Real ks_statistic(const Vector& a, const Vector& b) {
  if (a.size() == 0 || b.size() == 0)
    throw InvalidArgument("ks_statistic: both samples must be nonempty");
  std::vector<Real> sa(a.data(), a.data() + a.size());
  std::vector<Real> sb(b.data(), b.data() + b.size());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const Real na = static_cast<Real>(sa.size());
  const Real nb = static_cast<Real>(sb.size());
  std::size_t i = 0, j = 0;
  Real d = 0.0;
  while (i < sa.size() && j < sb.size()) {
    const Real v = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] <= v) ++i;
    while (j < sb.size() && sb[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<Real>(i) / na - static_cast<Real>(j) / nb));
  }
  if (i < sa.size()) d = std::max(d, 1.0 - static_cast<Real>(i) / na);
  if (j < sb.size()) d = std::max(d, 1.0 - static_cast<Real>(j) / nb);
  return d;
}

ComparisonReport compare_distributions(const Matrix& empirical, const Matrix& theoretical,
                                       const CompareThresholds& thresholds,
                                       const std::vector<std::string>& labels) {
  if (empirical.cols() != theoretical.cols())
    throw InvalidArgument("compare_distributions: column count mismatch");
  if (empirical.rows() == 0 || theoretical.rows() == 0)
    throw InvalidArgument("compare_distributions: empty sample");

  ComparisonReport report;
  report.pass = true;
  for (Index c = 0; c < empirical.cols(); ++c) {
    ScalarComparison cmp;
    cmp.label = c < static_cast<Index>(labels.size()) ? labels[static_cast<std::size_t>(c)]
                                                      : "col" + std::to_string(c);
    const Vector e = empirical.col(c);
    const Vector t = theoretical.col(c);
    cmp.n_empirical = e.size();
    cmp.n_theoretical = t.size();
    cmp.ks = ks_statistic(e, t);
    cmp.mean_empirical = sample_mean(e);
    cmp.mean_theoretical = sample_mean(t);
    cmp.var_empirical = sample_variance(e);
    cmp.var_theoretical = sample_variance(t);
    cmp.zero_mass_empirical =
        static_cast<Real>((e.cwiseAbs().array() <= thresholds.zero_eps).count()) /
        static_cast<Real>(e.size());
    cmp.zero_mass_theoretical =
        static_cast<Real>((t.cwiseAbs().array() <= thresholds.zero_eps).count()) /
        static_cast<Real>(t.size());

    cmp.pass = true;
    if (cmp.ks > thresholds.ks) {
      cmp.pass = false;
      cmp.failure = "ks";
    } else if (thresholds.check_mean &&
               std::abs(cmp.mean_empirical - cmp.mean_theoretical) > thresholds.mean_tol) {
      cmp.pass = false;
      cmp.failure = "mean";
    } else if (thresholds.check_variance && (cmp.var_empirical < thresholds.var_lo ||
                                             cmp.var_empirical > thresholds.var_hi)) {
      cmp.pass = false;
      cmp.failure = "variance";
    } else if (thresholds.check_zero_mass &&
               (cmp.zero_mass_empirical < thresholds.zero_lo ||
                cmp.zero_mass_empirical > thresholds.zero_hi)) {
      cmp.pass = false;
      cmp.failure = "zero_mass";
    }
    report.pass = report.pass && cmp.pass;
    report.columns.push_back(std::move(cmp));
  }
  return report;
}

std::pair<Matrix, Matrix> project_errors(const Matrix& errors, const Matrix& L_basis) {
  const Index n = errors.cols();
  if (L_basis.rows() != n && L_basis.cols() != 0)
    throw InvalidArgument("project_errors: basis row count does not match error dimension");
  const Index dim = L_basis.cols();
  if (dim > 0) {
    const Matrix gram = L_basis.transpose() * L_basis;
    if ((gram - Matrix::Identity(dim, dim)).lpNorm<Eigen::Infinity>() > 1e-8)
      throw InvalidArgument("project_errors: basis is not orthonormal");
  }
  if (dim == 0) return {Matrix(errors.rows(), 0), errors};
  if (dim == n) return {errors * L_basis, Matrix(errors.rows(), 0)};
  Eigen::HouseholderQR<Matrix> qr(L_basis);
  const Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  const Matrix complement = q.rightCols(n - dim);
  return {errors * L_basis, errors * complement};
}

}  // namespace minimax
