#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "minimax/reduction.hpp"

#include <cmath>

using namespace minimax;

TEST_CASE("active set detection keeps only top-value finite branches") {
  const ProblemSpec p = make_builtin("paper_example");
  const auto at_star = detect_active_set(p, Vector::Zero(1));
  REQUIRE(at_star.size() == 2);
  CHECK(at_star[0].isolated);
  Vector off(1);
  off << 0.5;
  const auto away = detect_active_set(p, off);
  REQUIRE(away.size() == 1);
  CHECK(away[0].xi.index == 1);  // +gamma branch dominates at 0.5
  CHECK(away[0].value == doctest::Approx(0.5));
}

TEST_CASE("active set detection locates interior box maximizers") {
  const ProblemSpec p = make_builtin("smooth_saddle");
  const auto active = detect_active_set(p, Vector::Zero(1));
  REQUIRE(active.size() == 1);
  CHECK(!active[0].isolated);
  CHECK(std::abs(active[0].xi.coords[0]) <= 1e-7);
}

TEST_CASE("active maximizers on the inner boundary are rejected") {
  // sup over xi of gamma + xi on a box attains at the upper corner
  ProblemSpec p;
  p.name = "edge_inner";
  p.n = 1;
  p.m = 1;
  p.d = 0;
  p.gamma_set = make_box(1, -1.0, 1.0);
  p.xi_set.kind = XiSet::Kind::box;
  p.xi_set.box = make_box(1, -1.0, 1.0);
  p.shared_poly = Polynomial(1, 1, {term(1.0, {1}, {0}), term(1.0, {0}, {1})});
  p.validate();
  CHECK_THROWS_AS((void)detect_active_set(p, Vector::Zero(1)), AssumptionViolation);
}

TEST_CASE("branch derivatives: plain blocks for isolated points") {
  const ProblemSpec p = make_builtin("vee_value");
  const PopulationObjective obj(p);
  const auto active = detect_active_set(p, Vector::Zero(1));
  const PhiDerivatives d0 = phi_derivatives(obj, Vector::Zero(1), active[0]);
  const PhiDerivatives d1 = phi_derivatives(obj, Vector::Zero(1), active[1]);
  CHECK(d0.grad[0] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(d1.grad[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d0.hess(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("branch derivatives: reduced curvature through the inner response") {
  const ProblemSpec p = make_builtin("smooth_saddle");
  const PopulationObjective obj(p);
  const auto active = detect_active_set(p, Vector::Zero(1));
  REQUIRE(active.size() == 1);
  const PhiDerivatives d = phi_derivatives(obj, Vector::Zero(1), active[0]);
  CHECK(d.grad[0] == doctest::Approx(0.0).epsilon(1e-9));
  // phi(g) = (1 + b^2) g^2 / 2 with b = 1
  CHECK(d.hess(0, 0) == doctest::Approx(2.0).epsilon(1e-9));

  // against central differences of phi computed by fresh inner solves
  const Real h = 1e-4;
  auto phi = [&](Real g) {
    return inner_maximize(obj, Vector::Constant(1, g))[0].value;
  };
  const Real fd_grad = (phi(h) - phi(-h)) / (2.0 * h);
  const Real fd_hess = (phi(h) - 2.0 * phi(0.0) + phi(-h)) / (h * h);
  CHECK(std::abs(d.grad[0] - fd_grad) <= 1e-4);
  CHECK(std::abs(d.hess(0, 0) - fd_hess) <= 1e-4);
}

TEST_CASE("multipliers solve the convex stationarity system") {
  const MultiplierResult paper = lagrange_multipliers({Vector::Constant(1, -1.0),
                                                       Vector::Constant(1, 1.0)});
  CHECK(paper.unique);
  CHECK(paper.lambda[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(paper.lambda[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(paper.residual <= 1e-12);
  CHECK(paper.min_sigma_differenced == doctest::Approx(2.0).epsilon(1e-12));

  const MultiplierResult cone = lagrange_multipliers({Vector::Zero(1),
                                                      Vector::Constant(1, 1.0)});
  CHECK(cone.unique);
  CHECK(cone.lambda[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cone.lambda[1] == doctest::Approx(0.0).epsilon(1e-12));

  const MultiplierResult single = lagrange_multipliers({Vector::Zero(2)});
  CHECK(single.unique);
  CHECK(single.lambda[0] == 1.0);
}

TEST_CASE("multiplier solve rejects infeasible stationarity") {
  // both gradients on the same side: the weights would need a negative entry
  CHECK_THROWS_AS((void)lagrange_multipliers({Vector::Constant(1, 1.0),
                                              Vector::Constant(1, 2.0)}),
                  AssumptionViolation);
  // single nonzero gradient: no convex combination vanishes
  CHECK_THROWS_AS((void)lagrange_multipliers({Vector::Constant(1, 0.5)}),
                  AssumptionViolation);
}

TEST_CASE("dependent gradients produce the multiplier polytope vertices") {
  const std::vector<Vector> grads = {Vector::Constant(1, -1.0), Vector::Constant(1, 1.0),
                                     Vector::Constant(1, 1.0)};
  const MultiplierResult res = lagrange_multipliers(grads);
  CHECK(!res.unique);
  REQUIRE(res.vertices.rows() == 2);
  // lex-sorted rows: (1/2, 0, 1/2) then (1/2, 1/2, 0)
  CHECK(res.vertices(0, 0) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(res.vertices(0, 1) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(res.vertices(0, 2) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(res.vertices(1, 1) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(res.vertices(1, 2) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("polytope enumeration caps the branch count") {
  std::vector<Vector> grads(7, Vector::Zero(1));
  CHECK_THROWS_AS((void)lambda_polytope_vertices(grads), CapabilityError);
}

TEST_CASE("index sets split on the multiplier threshold") {
  const std::vector<Vector> grads = {Vector::Zero(1), Vector::Constant(1, 1.0)};
  Vector lambda(2);
  lambda << 1.0, 0.0;
  const IndexSets sets = index_sets_and_cones(grads, lambda);
  CHECK(sets.I_plus == std::vector<int>{0});
  CHECK(sets.I_zero == std::vector<int>{1});
  // the positive branch has a zero gradient, so nothing is pinned
  CHECK(sets.L_basis.cols() == 1);
  CHECK(std::abs(sets.L_basis(0, 0)) == doctest::Approx(1.0));
}

TEST_CASE("reduction of the builtins matches their ground truth") {
  struct Expect {
    const char* name;
    Index k;
    bool strict;
    bool degenerate;
    Index l_dim;
  };
  const Expect table[] = {
      {"paper_example", 2, true, true, 0},
      {"smooth_saddle", 1, true, false, 1},
      {"vee_value", 2, true, true, 0},
      {"cone_qp", 2, false, false, 1},
      {"ridge2d", 2, true, false, 1},
  };
  for (const auto& e : table) {
    const ProblemSpec p = make_builtin(e.name);
    const ReductionData rd = reduce_problem(p, p.truth.gamma_star);
    INFO(e.name);
    CHECK(rd.k() == e.k);
    CHECK(rd.strict_complementarity == e.strict);
    CHECK(rd.degenerate_k_n_plus_1 == e.degenerate);
    CHECK(rd.index_sets.L_basis.cols() == e.l_dim);
    CHECK(rd.multipliers.unique);
    REQUIRE(rd.multipliers.lambda.size() == p.truth.lambda_star.size());
    CHECK((rd.multipliers.lambda - p.truth.lambda_star).lpNorm<Eigen::Infinity>() <= 1e-9);
    CHECK(!rd.certificates.empty());
  }
}

TEST_CASE("weighted curvature of ridge2d is the identity") {
  const ProblemSpec p = make_builtin("ridge2d");
  const ReductionData rd = reduce_problem(p, p.truth.gamma_star);
  CHECK((rd.H - Matrix::Identity(2, 2)).lpNorm<Eigen::Infinity>() <= 1e-12);
  // pinned subspace is the second axis
  CHECK(std::abs(rd.index_sets.L_basis(1, 0)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(rd.index_sets.L_basis(0, 0)) <= 1e-12);
}

TEST_CASE("certificates report the expected pattern per builtin") {
  auto passes = [](const ReductionData& rd, const char* name) {
    return rd.certificate_passes(name);
  };
  {
    const ProblemSpec p = make_builtin("cone_qp");
    const ReductionData rd = reduce_problem(p, p.truth.gamma_star);
    CHECK(passes(rd, "finite_active_set"));
    CHECK(passes(rd, "affine_independence"));
    CHECK(passes(rd, "unique_multipliers"));
    CHECK(!passes(rd, "strict_complementarity"));
    CHECK(passes(rd, "second_order_strict"));
    CHECK(passes(rd, "second_order_critical_sampled"));
  }
  {
    const ProblemSpec p = make_builtin("smooth_saddle");
    const ReductionData rd = reduce_problem(p, p.truth.gamma_star);
    CHECK(passes(rd, "inner_stationarity"));
    CHECK(passes(rd, "inner_hessian_nonsingular"));
    CHECK(passes(rd, "strict_complementarity"));
    CHECK(passes(rd, "second_order_strict"));
  }
  {
    const ProblemSpec p = make_builtin("paper_example");
    const ReductionData rd = reduce_problem(p, p.truth.gamma_star);
    CHECK(passes(rd, "strict_complementarity"));
    for (const auto& c : rd.certificates) {
      if (c.name == "degenerate_pinning") CHECK(c.applicable);
      if (c.name == "second_order_strict") CHECK(!c.applicable);  // nothing to test on {0}
    }
  }
}

TEST_CASE("certificate witnesses carry the key scalars") {
  const ProblemSpec p = make_builtin("ridge2d");
  const ReductionData rd = reduce_problem(p, p.truth.gamma_star);
  for (const auto& c : rd.certificates) {
    if (c.name == "strict_complementarity") CHECK(c.witness == doctest::Approx(0.5));
    if (c.name == "affine_independence") CHECK(c.witness == doctest::Approx(2.0));
    if (c.name == "second_order_strict") CHECK(c.witness == doctest::Approx(1.0));
  }
}

TEST_CASE("directional derivative formula reproduces the minsup/weighted gap") {
  const ProblemSpec p = make_builtin("paper_example");
  const Perturbation eta = Perturbation::constants(p, {1.0, 0.0});
  const DirDerivFormula formula =
      value_dirderiv_formula(p, {p.truth.gamma_star}, eta);
  REQUIRE(formula.entries.size() == 1);
  REQUIRE(formula.entries[0].eta_values.size() == 2);
  CHECK(formula.entries[0].eta_values[0] == doctest::Approx(1.0));
  CHECK(formula.entries[0].eta_values[1] == doctest::Approx(0.0));
  CHECK(formula.minsup == doctest::Approx(1.0).epsilon(1e-12));
  REQUIRE(formula.weighted.has_value());
  CHECK(*formula.weighted == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("formula takes the minimum over several population minimizers") {
  // double well (g^2 - 1)^2: two global minimizers at g = -1 and g = +1
  ProblemSpec p;
  p.name = "double_well";
  p.n = 1;
  p.m = 0;
  p.d = 0;
  p.gamma_set = make_box(1, -2.0, 2.0);
  p.xi_set.kind = XiSet::Kind::finite_list;
  p.xi_set.list.points = {Vector(0)};
  p.xi_set.list.labels = {"only"};
  p.branch_polys = {
      Polynomial(1, 0, {term(1.0, {4}), term(-2.0, {2}), term(1.0, {0})})};
  p.validate();
  Perturbation eta;
  eta.branch = {Polynomial(1, 0, {term(1.0, {1})})};  // eta(g) = g
  Vector left(1), right(1);
  left << -1.0;
  right << 1.0;
  const DirDerivFormula formula = value_dirderiv_formula(p, {left, right}, eta);
  REQUIRE(formula.entries.size() == 2);
  CHECK(formula.entries[0].minsup == doctest::Approx(-1.0));
  CHECK(formula.entries[1].minsup == doctest::Approx(1.0));
  CHECK(formula.minsup == doctest::Approx(-1.0));
  REQUIRE(formula.weighted.has_value());
  CHECK(*formula.weighted == doctest::Approx(-1.0));
}
