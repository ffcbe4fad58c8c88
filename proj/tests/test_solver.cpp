#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "minimax/solver.hpp"

#include <cmath>

using namespace minimax;

namespace {

Dataset dataset_with_means(const ProblemSpec& p, const Vector& means) {
  Dataset data;
  data.draws = Matrix::Zero(2, p.d);
  data.draws.row(0) = 2.0 * means.transpose();
  data.seed = 0;
  data.from_sampler = false;
  return data;
}

}  // namespace

TEST_CASE("inner maximization lists finite branches best-first") {
  const ProblemSpec p = make_builtin("paper_example");
  const PopulationObjective obj(p);
  Vector g(1);
  g << 0.3;
  const auto pts = inner_maximize(obj, g);
  REQUIRE(pts.size() == 2);
  CHECK(pts[0].value == doctest::Approx(0.3));
  CHECK(pts[0].xi.index == 1);
  CHECK(pts[1].value == doctest::Approx(-0.3));
  CHECK(pts[1].xi.index == 0);
}

TEST_CASE("inner maximization finds the interior box maximizer") {
  const ProblemSpec p = make_builtin("smooth_saddle");
  const PopulationObjective obj(p);
  Vector g(1);
  g << 0.5;
  const auto pts = inner_maximize(obj, g);
  REQUIRE(!pts.empty());
  // sup_xi [g xi - xi^2/2] + g^2/2 at xi = g
  CHECK(pts[0].xi.coords[0] == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(pts[0].value == doctest::Approx(0.25).epsilon(1e-10));
  CHECK_THROWS_AS((void)inner_maximize(obj, Vector::Constant(1, 5.0)), DomainError);
}

TEST_CASE("population solves recover the exact optimum of every builtin") {
  for (const auto& name : builtin_names()) {
    const ProblemSpec p = make_builtin(name);
    const MinimaxSolution sol = solve_population(p);
    INFO(name);
    CHECK(sol.status == SolveStatus::converged);
    CHECK((sol.gamma_hat - p.truth.gamma_star).norm() <= 1e-9);
    CHECK(std::abs(sol.theta_hat - p.truth.theta_star) <= 1e-10);
    CHECK(sol.source.kind == SourceTag::Kind::population);
  }
}

TEST_CASE("sample solve matches the closed form on a crafted vee dataset") {
  const ProblemSpec p = make_builtin("vee_value");
  Vector means(2);
  means << 0.3, 0.0;
  const Dataset data = dataset_with_means(p, means);
  const MinimaxSolution sol = solve_sample(p, data);
  // branches: -g + g^2/2 + 0.3 and g + g^2/2; kink at g = 0.15
  CHECK(sol.status == SolveStatus::converged);
  CHECK(sol.gamma_hat[0] == doctest::Approx(0.15).epsilon(1e-12));
  CHECK(sol.theta_hat == doctest::Approx(0.16125).epsilon(1e-12));
  CHECK(sol.source.kind == SourceTag::Kind::sample);
  CHECK(sol.source.N == 2);
  CHECK(!sol.source.synthetic == false);  // hand-built dataset
}

TEST_CASE("sample solve matches the closed form on smooth_saddle") {
  const ProblemSpec p = make_builtin("smooth_saddle");
  const Dataset data = sample_dataset(p, 4000, 123);
  const Vector xbar = column_means(data.draws);
  const MinimaxSolution sol = solve_sample(p, data);
  CHECK(sol.status == SolveStatus::converged);
  CHECK(sol.gamma_hat[0] == doctest::Approx(-(xbar[0] + xbar[1]) / 2.0).epsilon(1e-9));
}

TEST_CASE("cone sample solve pins the kink exactly when it is the minimizer") {
  const ProblemSpec p = make_builtin("cone_qp");
  Vector neg(2), pos(2);
  neg << -0.2, 0.05;
  pos << 0.2, 0.05;
  const MinimaxSolution at_kink = solve_sample(p, dataset_with_means(p, neg));
  CHECK(at_kink.gamma_hat[0] == 0.0);  // exact, not approximate
  CHECK(at_kink.theta_hat == 0.0);
  const MinimaxSolution interior = solve_sample(p, dataset_with_means(p, pos));
  CHECK(interior.gamma_hat[0] == doctest::Approx(-0.2).epsilon(1e-12));
}

TEST_CASE("sample value estimates tighten with N") {
  const ProblemSpec p = make_builtin("vee_value");
  for (const Index N : {1000, 4000, 16000}) {
    const MinimaxSolution sol = solve_sample(p, sample_dataset(p, N, 5));
    CHECK(std::abs(sol.theta_hat) <= 5.0 / std::sqrt(static_cast<Real>(N)));
  }
}

TEST_CASE("difference quotients of the value are flat on a piecewise-linear problem") {
  const ProblemSpec p = make_builtin("paper_example");
  const Perturbation eta = Perturbation::constants(p, {1.0, 0.0});
  const auto fd = value_dirderiv_fd(p, eta, {1e-2, 1e-3});
  CHECK(fd.base_value == 0.0);
  for (const Real q : fd.quotients) CHECK(q == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(fd.estimate == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(fd.monotone);
}

TEST_CASE("difference quotients handle a shared perturbation polynomial") {
  const ProblemSpec p = make_builtin("smooth_saddle");
  Perturbation eta;
  eta.shared = Polynomial(1, 1, {term(1.0, {2}, {0}), term(1.0, {0}, {0})});
  const auto fd = value_dirderiv_fd(p, eta, {1e-1, 1e-2});
  // V(f + t eta) = t: the perturbation only stiffens the outer curvature
  for (const Real q : fd.quotients) CHECK(q == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("value differencing validates its grid") {
  const ProblemSpec p = make_builtin("paper_example");
  const Perturbation eta = Perturbation::constants(p, {1.0, 0.0});
  CHECK_THROWS_AS((void)value_dirderiv_fd(p, eta, {1e-2}), InvalidArgument);
  CHECK_THROWS_AS((void)value_dirderiv_fd(p, eta, {1e-2, -1e-3}), InvalidArgument);
  CHECK_THROWS_AS((void)value_dirderiv_fd(p, Perturbation{}, {1e-2, 1e-3}), Error);
}

namespace {

// max((x-1)^2, (x+1)^2) has its minimum 1 at x = 0 with weights (1/2, 1/2).
class TwoParabolas : public BranchFamily {
 public:
  int count() const override { return 2; }
  Real value(const Vector& x, int i) override {
    const Real c = i == 0 ? 1.0 : -1.0;
    return (x[0] - c) * (x[0] - c);
  }
  BranchEval eval(const Vector& x, int i) override {
    const Real c = i == 0 ? 1.0 : -1.0;
    BranchEval e;
    e.value = (x[0] - c) * (x[0] - c);
    e.grad = Vector::Constant(1, 2.0 * (x[0] - c));
    e.hess = Matrix::Constant(1, 1, 2.0);
    return e;
  }
};

}  // namespace

TEST_CASE("epigraph solver balances two parabolas") {
  TwoParabolas family;
  const EpigraphResult res = epigraph_minimize(family, Vector::Constant(1, 0.7));
  CHECK(res.converged);
  CHECK(res.x[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(res.value == doctest::Approx(1.0).epsilon(1e-12));
  REQUIRE(res.active.size() == 2);
  CHECK(res.lambda[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(res.lambda[1] == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("epigraph solver follows a single smooth branch") {
  // one parabola: active set stays a singleton and Newton walks to its vertex
  class OneParabola : public BranchFamily {
   public:
    int count() const override { return 1; }
    Real value(const Vector& x, int) override { return (x[0] - 3.0) * (x[0] - 3.0); }
    BranchEval eval(const Vector& x, int) override {
      BranchEval e;
      e.value = (x[0] - 3.0) * (x[0] - 3.0);
      e.grad = Vector::Constant(1, 2.0 * (x[0] - 3.0));
      e.hess = Matrix::Constant(1, 1, 2.0);
      return e;
    }
  } family;
  const EpigraphResult res = epigraph_minimize(family, Vector::Zero(1));
  CHECK(res.converged);
  CHECK(res.x[0] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("outer solve reports a boundary hit") {
  ProblemSpec p;
  p.name = "edge";
  p.n = 1;
  p.m = 0;
  p.d = 0;
  p.gamma_set = make_box(1, -1.0, 1.0);
  p.xi_set.kind = XiSet::Kind::finite_list;
  p.xi_set.list.points = {Vector(0)};
  p.xi_set.list.labels = {"only"};
  p.branch_polys = {Polynomial(1, 0, {term(1.0, {1})})};
  p.validate();
  const MinimaxSolution sol = solve_population(p);
  CHECK(sol.status == SolveStatus::boundary_hit);
  CHECK(sol.gamma_hat[0] == doctest::Approx(-1.0).epsilon(1e-9));
}
