#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "minimax/montecarlo.hpp"
#include "minimax/rng.hpp"

#include <cmath>

using namespace minimax;

namespace {

Vector normal_draws(Index count, std::uint64_t seed, Real sd = 1.0) {
  rng::CounterStream s(seed);
  Vector out(count);
  for (Index i = 0; i < count; ++i) out(i) = sd * s.normal(static_cast<std::uint64_t>(i));
  return out;
}

}  // namespace

TEST_CASE("replications are bitwise independent of the thread count") {
  const ProblemSpec p = make_builtin("smooth_saddle");
  const ReplicationSet one = run_replications(p, 200, 40, 99, 1);
  const ReplicationSet four = run_replications(p, 200, 40, 99, 4);
  CHECK((one.scaled_gamma_errors - four.scaled_gamma_errors).cwiseAbs().maxCoeff() == 0.0);
  CHECK((one.scaled_value_errors - four.scaled_value_errors).cwiseAbs().maxCoeff() == 0.0);
  CHECK(one.statuses == four.statuses);
  CHECK(one.converged_count == four.converged_count);
  CHECK(one.exact_recovery_count == four.exact_recovery_count);
}

TEST_CASE("deterministic objective recovers the optimum in every replication") {
  const ProblemSpec p = make_builtin("paper_example");
  const ReplicationSet set = run_replications(p, 500, 30, 7);
  CHECK(set.converged_count == 30);
  CHECK(set.exact_recovery_count == 30);
  CHECK(set.scaled_gamma_errors.cwiseAbs().maxCoeff() == 0.0);
  CHECK(set.scaled_value_errors.cwiseAbs().maxCoeff() == 0.0);
  CHECK(set.converged_gamma_errors().rows() == 30);
  CHECK(set.converged_value_errors().size() == 30);
}

TEST_CASE("replication errors match the closed-form estimator") {
  // smooth saddle: gamma_hat = -(mean x1 + mean x2) / 2, dataset seed mix(seed, r)
  const ProblemSpec p = make_builtin("smooth_saddle");
  const Index n_samples = 400;
  const ReplicationSet set = run_replications(p, n_samples, 25, 4242);
  const Real root_n = std::sqrt(static_cast<Real>(n_samples));
  for (Index r = 0; r < set.R; ++r) {
    const Dataset data =
        sample_dataset(p, n_samples, rng::mix(4242, static_cast<std::uint64_t>(r)));
    const Real want =
        -root_n * (pairwise_mean(data.draws.col(0)) + pairwise_mean(data.draws.col(1))) / 2.0;
    // compass tie-breaks leave the iterate within ~1e-10 of the closed form
    CHECK(set.scaled_gamma_errors(r, 0) == doctest::Approx(want).epsilon(1e-8));
  }
}

TEST_CASE("kink pinning produces exact zeros in about half the replications") {
  const ProblemSpec p = make_builtin("cone_qp");
  const ReplicationSet set = run_replications(p, 4000, 300, 2025, 4);
  Index exact = 0;
  for (Index r = 0; r < set.R; ++r)
    if (set.scaled_gamma_errors(r, 0) == 0.0) ++exact;
  const Real frac = static_cast<Real>(exact) / static_cast<Real>(set.R);
  CHECK(frac > 0.4);
  CHECK(frac < 0.6);
  CHECK(set.exact_recovery_count >= exact);
}

TEST_CASE("replication guards") {
  const ProblemSpec p = make_builtin("smooth_saddle");
  CHECK_THROWS_AS((void)run_replications(p, 0, 10, 1), InvalidArgument);
  CHECK_THROWS_AS((void)run_replications(p, 10, 0, 1), InvalidArgument);
  ProblemSpec no_truth = p;
  no_truth.truth.known = false;
  CHECK_THROWS_AS((void)run_replications(no_truth, 10, 5, 1), InvalidArgument);

  // single linear branch: every replication stops on the box boundary
  ProblemSpec edge;
  edge.name = "edge";
  edge.n = 1;
  edge.m = 0;
  edge.d = 0;
  edge.gamma_set = make_box(1, -1.0, 1.0);
  edge.xi_set.kind = XiSet::Kind::finite_list;
  edge.xi_set.list.points = {Vector(0)};
  edge.xi_set.list.labels = {"only"};
  edge.branch_polys = {Polynomial(1, 0, {term(1.0, {1})})};
  edge.validate();
  edge.truth.known = true;
  edge.truth.gamma_star = Vector::Constant(1, -1.0);
  edge.truth.theta_star = -1.0;
  CHECK_THROWS_AS((void)run_replications(edge, 10, 5, 1), NumericalError);
}

TEST_CASE("two-sample KS statistic on hand-checkable samples") {
  Vector a(2), b(1);
  a << 0.0, 1.0;
  b << 0.5;
  CHECK(ks_statistic(a, b) == doctest::Approx(0.5).epsilon(1e-15));
  Vector c(3), d(1);
  c << 0.0, 0.0, 1.0;
  d << 0.0;
  CHECK(ks_statistic(c, d) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const Vector e = normal_draws(5000, 1);
  CHECK(ks_statistic(e, e) == 0.0);
  CHECK_THROWS_AS((void)ks_statistic(Vector(0), e), InvalidArgument);
}

TEST_CASE("KS statistic separates laws at realistic sample sizes") {
  const Vector a = normal_draws(20000, 10);
  const Vector b = normal_draws(20000, 11);
  const Vector wide = normal_draws(20000, 12, 2.0);
  CHECK(ks_statistic(a, b) < 0.03);
  CHECK(ks_statistic(a, wide) > 0.15);
}

TEST_CASE("distribution comparison applies threshold clauses in order") {
  const Index s = 5000;
  Matrix e(s, 1), t(s, 1);
  e.col(0) = normal_draws(s, 21);
  t.col(0) = normal_draws(s, 22);

  CompareThresholds base;
  const ComparisonReport ok = compare_distributions(e, t, base, {"value"});
  REQUIRE(ok.columns.size() == 1);
  CHECK(ok.pass);
  CHECK(ok.columns[0].pass);
  CHECK(ok.columns[0].failure.empty());
  CHECK(ok.columns[0].label == "value");
  CHECK(ok.columns[0].n_empirical == s);

  Matrix shifted = e;
  shifted.col(0).array() += 0.2;
  const ComparisonReport ks_fail = compare_distributions(shifted, t, base);
  CHECK(!ks_fail.pass);
  CHECK(ks_fail.columns[0].failure == "ks");
  CHECK(ks_fail.columns[0].label == "col0");

  CompareThresholds loose_ks = base;
  loose_ks.ks = 1.0;
  loose_ks.check_mean = true;
  loose_ks.mean_tol = 0.05;
  const ComparisonReport mean_fail = compare_distributions(shifted, t, loose_ks);
  CHECK(mean_fail.columns[0].failure == "mean");

  Matrix wide = e;
  wide.col(0) *= 2.0;
  CompareThresholds var_window = base;
  var_window.ks = 1.0;
  var_window.check_variance = true;
  var_window.var_lo = 0.5;
  var_window.var_hi = 1.5;
  const ComparisonReport var_fail = compare_distributions(wide, t, var_window);
  CHECK(var_fail.columns[0].failure == "variance");
  CHECK(var_fail.columns[0].var_empirical > 3.0);

  Matrix masses(10, 1), ones(10, 1);
  masses.col(0) << 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0;
  ones = masses;
  CompareThresholds zero_window = base;
  zero_window.ks = 1.0;
  zero_window.check_zero_mass = true;
  zero_window.zero_lo = 0.4;
  zero_window.zero_hi = 0.6;
  const ComparisonReport zero_fail = compare_distributions(masses, ones, zero_window);
  CHECK(zero_fail.columns[0].failure == "zero_mass");
  CHECK(zero_fail.columns[0].zero_mass_empirical == doctest::Approx(0.3));

  CHECK_THROWS_AS((void)compare_distributions(e, Matrix(s, 2), base), InvalidArgument);
  CHECK_THROWS_AS((void)compare_distributions(Matrix(0, 1), t, base), InvalidArgument);
}

TEST_CASE("error projection splits subspace and complement coordinates") {
  rng::CounterStream s(33);
  Matrix errors(50, 2);
  for (Index r = 0; r < 50; ++r)
    for (Index c = 0; c < 2; ++c)
      errors(r, c) = s.normal(static_cast<std::uint64_t>(2 * r) + static_cast<std::uint64_t>(c));

  Matrix basis(2, 1);
  basis << 0.0, 1.0;
  const auto [proj, orth] = project_errors(errors, basis);
  REQUIRE(proj.cols() == 1);
  REQUIRE(orth.cols() == 1);
  CHECK((proj.col(0) - errors.col(1)).cwiseAbs().maxCoeff() == 0.0);
  // completion is orthonormal, so row norms are preserved
  for (Index r = 0; r < 50; ++r) {
    const Real have = proj.row(r).squaredNorm() + orth.row(r).squaredNorm();
    CHECK(have == doctest::Approx(errors.row(r).squaredNorm()).epsilon(1e-12));
  }

  const auto [full, none] = project_errors(errors, Matrix::Identity(2, 2));
  CHECK(none.cols() == 0);
  CHECK((full - errors).cwiseAbs().maxCoeff() == 0.0);

  const auto [empty, all] = project_errors(errors, Matrix(2, 0));
  CHECK(empty.cols() == 0);
  CHECK((all - errors).cwiseAbs().maxCoeff() == 0.0);

  Matrix skewed(2, 1);
  skewed << 2.0, 0.0;
  CHECK_THROWS_AS((void)project_errors(errors, skewed), InvalidArgument);
  CHECK_THROWS_AS((void)project_errors(errors, Matrix::Identity(3, 3)), InvalidArgument);
}
