#include "minimax/problem.hpp"

#include "minimax/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace minimax {

namespace {

class PolyOracle : public FOracle {
 public:
  explicit PolyOracle(const ProblemSpec& p) : p_(&p) {}

  Real value(const Vector& x, const Vector& gamma, const XiPoint& xi) const override {
    return p_->poly_for(xi).value(gamma, p_->xi_coords(xi), x);
  }
  Vector gradient(const Vector& x, const Vector& gamma, const XiPoint& xi) const override {
    return p_->poly_for(xi).gradient(gamma, p_->xi_coords(xi), x);
  }
  Matrix hessian(const Vector& x, const Vector& gamma, const XiPoint& xi) const override {
    return p_->poly_for(xi).hessian(gamma, p_->xi_coords(xi), x);
  }

 private:
  const ProblemSpec* p_;
};

Vector vec1(Real a) {
  Vector v(1);
  v << a;
  return v;
}

}  // namespace

const Polynomial& ProblemSpec::poly_for(const XiPoint& xi) const {
  if (!branch_polys.empty()) {
    if (xi.index < 0 || xi.index >= static_cast<int>(branch_polys.size())) {
      throw DomainError("problem '" + name + "': branch index out of range");
    }
    return branch_polys[static_cast<size_t>(xi.index)];
  }
  if (!shared_poly) throw InvalidArgument("problem '" + name + "': no objective polynomial");
  return *shared_poly;
}

Vector ProblemSpec::xi_coords(const XiPoint& xi) const {
  if (!branch_polys.empty()) return Vector(0);  // per-branch polynomials are gamma-only
  if (xi.index >= 0) {
    const auto& pts = xi_set.list.points;
    if (xi.index >= static_cast<int>(pts.size())) {
      throw DomainError("problem '" + name + "': list index out of range");
    }
    return pts[static_cast<size_t>(xi.index)];
  }
  if (xi.coords.size() != m) {
    throw DomainError("problem '" + name + "': inner point has wrong dimension");
  }
  return xi.coords;
}

XiPoint ProblemSpec::list_point(int i) const {
  if (!finite()) throw InvalidArgument("list_point on a box problem");
  return XiPoint::listed(i, xi_set.list.points[static_cast<size_t>(i)]);
}

const FOracle& ProblemSpec::oracle() const {
  if (!oracle_) oracle_ = std::make_shared<PolyOracle>(*this);
  return *oracle_;
}

void ProblemSpec::validate() const {
  if (n <= 0) throw InvalidArgument("problem: n must be positive");
  if (gamma_set.dim() != n) throw InvalidArgument("problem: gamma box dimension != n");
  if ((gamma_set.upper - gamma_set.lower).minCoeff() <= 0.0) {
    throw InvalidArgument("problem: gamma box is empty");
  }
  if (xi_set.kind == XiSet::Kind::box) {
    if (m <= 0) throw InvalidArgument("problem: box inner set needs m > 0");
    if (xi_set.box.dim() != m) throw InvalidArgument("problem: xi box dimension != m");
    if (!shared_poly) throw InvalidArgument("problem: box inner set needs a shared polynomial");
  } else {
    if (xi_set.list.points.empty()) throw InvalidArgument("problem: empty finite list");
    if (xi_set.list.labels.size() != xi_set.list.points.size()) {
      throw InvalidArgument("problem: labels/points length mismatch");
    }
    for (const auto& p : xi_set.list.points) {
      if (p.size() != m) throw InvalidArgument("problem: list point dimension != m");
    }
    if (!branch_polys.empty() &&
        branch_polys.size() != xi_set.list.points.size()) {
      throw InvalidArgument("problem: one branch polynomial per listed point required");
    }
    if (branch_polys.empty() && !shared_poly) {
      throw InvalidArgument("problem: finite list needs branch or shared polynomials");
    }
  }
  const auto check_poly = [&](const Polynomial& p) {
    if (p.n() != n) throw InvalidArgument("problem: polynomial gamma dimension != n");
    if (p.min_data_dim() > d) throw InvalidArgument("problem: polynomial references x beyond d");
  };
  for (const auto& p : branch_polys) check_poly(p);
  if (shared_poly) check_poly(*shared_poly);
}

// ---------------------------------------------------------------------------
// Builtins

namespace {

ProblemSpec make_paper_example() {
  ProblemSpec p;
  p.name = "paper_example";
  p.n = 1;
  p.m = 0;
  p.d = 0;
  p.gamma_set = make_box(1, -1.0, 1.0);
  p.xi_set.kind = XiSet::Kind::finite_list;
  p.xi_set.list.points = {Vector(0), Vector(0)};
  p.xi_set.list.labels = {"xi1", "xi2"};
  p.branch_polys = {Polynomial(1, 0, {term(-1.0, {1})}),
                    Polynomial(1, 0, {term(1.0, {1})})};
  GroundTruth& t = p.truth;
  t.known = true;
  t.gamma_star = vec1(0.0);
  t.theta_star = 0.0;
  t.active_indices = {0, 1};
  t.lambda_star = Vector(2);
  t.lambda_star << 0.5, 0.5;
  t.sigma_solution = Matrix::Zero(2, 2);  // deterministic objective
  t.cov_value = Matrix::Zero(2, 2);
  t.degenerate_k_n_plus_1 = true;  // k = 2 = n + 1
  return p;
}

ProblemSpec make_smooth_saddle(Real b) {
  ProblemSpec p;
  p.name = b == 1.0 ? "smooth_saddle" : "smooth_saddle(" + std::to_string(b) + ")";
  p.n = 1;
  p.m = 1;
  p.d = 2;
  p.gamma_set = make_box(1, -2.0, 2.0);
  p.xi_set.kind = XiSet::Kind::box;
  p.xi_set.box = make_box(1, -2.0, 2.0);
  p.shared_poly = Polynomial(
      1, 1,
      {term(0.5, {2}, {0}), term(b, {1}, {1}), term(-0.5, {0}, {2}),
       term(1.0, {1}, {0}, 0), term(1.0, {0}, {1}, 1)});
  GroundTruth& t = p.truth;
  t.known = true;
  t.gamma_star = vec1(0.0);
  t.theta_star = 0.0;
  t.active_points = {vec1(0.0)};
  t.lambda_star = vec1(1.0);
  // gradient of F in gamma at the saddle is X_1
  t.sigma_solution = Matrix::Constant(1, 1, 1.0);
  // F(X, 0, 0) = 0 identically
  t.cov_value = Matrix::Zero(1, 1);
  return p;
}

ProblemSpec make_vee_value() {
  ProblemSpec p;
  p.name = "vee_value";
  p.n = 1;
  p.m = 0;
  p.d = 2;
  p.gamma_set = make_box(1, -2.0, 2.0);
  p.xi_set.kind = XiSet::Kind::finite_list;
  p.xi_set.list.points = {Vector(0), Vector(0)};
  p.xi_set.list.labels = {"xi1", "xi2"};
  p.branch_polys = {
      Polynomial(1, 0, {term(-1.0, {1}), term(0.5, {2}), term(1.0, {0}, {}, 0)}),
      Polynomial(1, 0, {term(1.0, {1}), term(0.5, {2}), term(1.0, {0}, {}, 1)})};
  GroundTruth& t = p.truth;
  t.known = true;
  t.gamma_star = vec1(0.0);
  t.theta_star = 0.0;
  t.active_indices = {0, 1};
  t.lambda_star = Vector(2);
  t.lambda_star << 0.5, 0.5;
  t.sigma_solution = Matrix::Zero(2, 2);  // branch gradients contain no data terms
  t.cov_value = Matrix::Identity(2, 2);   // branch values at gamma* are (X_1, X_2)
  t.degenerate_k_n_plus_1 = true;
  return p;
}

ProblemSpec make_cone_qp() {
  ProblemSpec p;
  p.name = "cone_qp";
  p.n = 1;
  p.m = 0;
  p.d = 2;
  p.gamma_set = make_box(1, -2.0, 2.0);
  p.xi_set.kind = XiSet::Kind::finite_list;
  p.xi_set.list.points = {Vector(0), Vector(0)};
  p.xi_set.list.labels = {"xi1", "xi2"};
  p.branch_polys = {
      Polynomial(1, 0, {term(0.5, {2}), term(1.0, {1}, {}, 0)}),
      Polynomial(1, 0, {term(1.0, {1}), term(1.0, {2}), term(1.0, {1}, {}, 1)})};
  GroundTruth& t = p.truth;
  t.known = true;
  t.gamma_star = vec1(0.0);
  t.theta_star = 0.0;
  t.active_indices = {0, 1};
  t.lambda_star = Vector(2);
  t.lambda_star << 1.0, 0.0;
  t.sigma_solution = Matrix::Identity(2, 2);  // stacked gradients (X_1, X_2)
  t.cov_value = Matrix::Zero(2, 2);           // branch values at gamma* = 0 are 0
  return p;
}

ProblemSpec make_ridge2d() {
  ProblemSpec p;
  p.name = "ridge2d";
  p.n = 2;
  p.m = 0;
  p.d = 4;
  p.gamma_set = make_box(2, -2.0, 2.0);
  p.xi_set.kind = XiSet::Kind::finite_list;
  p.xi_set.list.points = {Vector(0), Vector(0)};
  p.xi_set.list.labels = {"xi1", "xi2"};
  p.branch_polys = {
      Polynomial(2, 0,
                 {term(-1.0, {1, 0}), term(0.5, {2, 0}), term(0.5, {0, 2}),
                  term(1.0, {1, 0}, {}, 0), term(1.0, {0, 1}, {}, 1)}),
      Polynomial(2, 0,
                 {term(1.0, {1, 0}), term(0.5, {2, 0}), term(0.5, {0, 2}),
                  term(1.0, {1, 0}, {}, 2), term(1.0, {0, 1}, {}, 3)})};
  GroundTruth& t = p.truth;
  t.known = true;
  t.gamma_star = Vector::Zero(2);
  t.theta_star = 0.0;
  t.active_indices = {0, 1};
  t.lambda_star = Vector(2);
  t.lambda_star << 0.5, 0.5;
  t.sigma_solution = Matrix::Identity(4, 4);  // stacked gradients (X^(1), X^(2))
  t.cov_value = Matrix::Zero(2, 2);
  return p;
}

}  // namespace

std::vector<std::string> builtin_names() {
  return {"paper_example", "smooth_saddle", "vee_value", "cone_qp", "ridge2d"};
}

ProblemSpec make_builtin(const std::string& name) {
  std::string base = name;
  std::optional<Real> arg;
  const auto open = name.find('(');
  if (open != std::string::npos) {
    if (name.back() != ')') throw InvalidArgument("builtin name '" + name + "': unbalanced parentheses");
    base = name.substr(0, open);
    const std::string inner = name.substr(open + 1, name.size() - open - 2);
    try {
      size_t used = 0;
      arg = std::stod(inner, &used);
      if (used != inner.size()) throw std::invalid_argument(inner);
    } catch (const std::exception&) {
      throw InvalidArgument("builtin name '" + name + "': bad parameter '" + inner + "'");
    }
  }

  ProblemSpec p;
  if (base == "paper_example") {
    p = make_paper_example();
  } else if (base == "smooth_saddle") {
    p = make_smooth_saddle(arg.value_or(1.0));
    arg.reset();
  } else if (base == "vee_value") {
    p = make_vee_value();
  } else if (base == "cone_qp") {
    p = make_cone_qp();
  } else if (base == "ridge2d") {
    p = make_ridge2d();
  } else {
    std::ostringstream os;
    os << "unknown builtin problem '" << name << "'; available:";
    for (const auto& b : builtin_names()) os << " " << b;
    throw InvalidArgument(os.str());
  }
  if (arg) throw InvalidArgument("builtin '" + base + "' takes no parameter");
  p.validate();
  return p;
}

// ---------------------------------------------------------------------------
// Sampling

Vector sample_x(const ProblemSpec& problem, std::uint64_t seed, std::uint64_t index) {
  return standard_normal_vector(rng::mix(seed, index), problem.d);
}

Dataset sample_dataset(const ProblemSpec& problem, Index N, std::uint64_t seed) {
  if (N <= 0) throw InvalidArgument("sample_dataset: N must be positive");
  Dataset ds;
  ds.seed = seed;
  ds.from_sampler = true;
  ds.draws.resize(N, problem.d);
  for (Index j = 0; j < N; ++j) {
    ds.draws.row(j) = sample_x(problem, seed, static_cast<std::uint64_t>(j));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Objectives

Vector Objective::gamma_gradient(const Vector& gamma, const XiPoint& xi) const {
  return joint_gradient(gamma, xi).head(n());
}

Vector Objective::xi_gradient(const Vector& gamma, const XiPoint& xi) const {
  return joint_gradient(gamma, xi).tail(m());
}

Matrix Objective::gamma_hessian(const Vector& gamma, const XiPoint& xi) const {
  return joint_hessian(gamma, xi).topLeftCorner(n(), n());
}

Matrix Objective::xi_hessian(const Vector& gamma, const XiPoint& xi) const {
  return joint_hessian(gamma, xi).bottomRightCorner(m(), m());
}

Matrix Objective::cross_hessian(const Vector& gamma, const XiPoint& xi) const {
  return joint_hessian(gamma, xi).topRightCorner(n(), m());
}

namespace {

std::vector<Polynomial> family_of(const ProblemSpec& p) {
  if (!p.branch_polys.empty()) return p.branch_polys;
  return {*p.shared_poly};
}

const Polynomial& pick(const std::vector<Polynomial>& polys, const ProblemSpec& p,
                       const XiPoint& xi) {
  if (polys.size() == 1 && p.branch_polys.empty()) return polys[0];
  if (xi.index < 0 || xi.index >= static_cast<int>(polys.size())) {
    throw DomainError("objective: branch index out of range");
  }
  return polys[static_cast<size_t>(xi.index)];
}

}  // namespace

PopulationObjective::PopulationObjective(const ProblemSpec& problem)
    : Objective(problem) {
  for (const auto& poly : family_of(problem)) polys_.push_back(poly.population());
}

Real PopulationObjective::value(const Vector& gamma, const XiPoint& xi) const {
  return pick(polys_, problem(), xi).value(gamma, problem().xi_coords(xi), Vector(0));
}

Vector PopulationObjective::joint_gradient(const Vector& gamma, const XiPoint& xi) const {
  return pick(polys_, problem(), xi).gradient(gamma, problem().xi_coords(xi), Vector(0));
}

Matrix PopulationObjective::joint_hessian(const Vector& gamma, const XiPoint& xi) const {
  return pick(polys_, problem(), xi).hessian(gamma, problem().xi_coords(xi), Vector(0));
}

EmpiricalObjective::EmpiricalObjective(const ProblemSpec& problem, const Dataset& data)
    : Objective(problem), data_(&data) {
  if (data.dim() != problem.d) {
    throw InvalidArgument("EmpiricalObjective: dataset dimension != problem.d");
  }
  if (data.N() <= 0) throw InvalidArgument("EmpiricalObjective: empty dataset");
  means_ = data.dim() > 0 ? column_means(data.draws) : Vector(0);
  for (const auto& poly : family_of(problem)) collapsed_.push_back(poly.collapse(means_));
}

Real EmpiricalObjective::value(const Vector& gamma, const XiPoint& xi) const {
  return pick(collapsed_, problem(), xi).value(gamma, problem().xi_coords(xi), Vector(0));
}

Vector EmpiricalObjective::joint_gradient(const Vector& gamma, const XiPoint& xi) const {
  return pick(collapsed_, problem(), xi).gradient(gamma, problem().xi_coords(xi), Vector(0));
}

Matrix EmpiricalObjective::joint_hessian(const Vector& gamma, const XiPoint& xi) const {
  return pick(collapsed_, problem(), xi).hessian(gamma, problem().xi_coords(xi), Vector(0));
}

Real EmpiricalObjective::value_rowwise(const Vector& gamma, const XiPoint& xi) const {
  const FOracle& f = problem().oracle();
  Vector vals(data_->N());
  for (Index j = 0; j < data_->N(); ++j) {
    vals[j] = f.value(data_->draws.row(j).transpose(), gamma, xi);
  }
  return pairwise_mean(vals);
}

Vector EmpiricalObjective::gradient_rowwise(const Vector& gamma, const XiPoint& xi) const {
  const FOracle& f = problem().oracle();
  Matrix grads(data_->N(), n() + m());
  for (Index j = 0; j < data_->N(); ++j) {
    grads.row(j) = f.gradient(data_->draws.row(j).transpose(), gamma, xi).transpose();
  }
  return column_means(grads);
}

// ---------------------------------------------------------------------------
// Derivative checking

namespace {

struct CheckPoint {
  Vector x;
  Vector gamma;
  XiPoint xi;
};

std::vector<CheckPoint> interior_points(const ProblemSpec& p, int num_points,
                                        std::uint64_t seed) {
  std::vector<CheckPoint> pts;
  pts.reserve(static_cast<size_t>(num_points));
  for (int i = 0; i < num_points; ++i) {
    rng::CounterStream s(rng::mix(seed, static_cast<std::uint64_t>(i)));
    std::uint64_t c = 0;
    CheckPoint cp;
    cp.gamma.resize(p.n);
    for (Index a = 0; a < p.n; ++a) {
      const Real u = s.uniform(c++);
      cp.gamma[a] = p.gamma_set.lower[a] +
                    (0.1 + 0.8 * u) * (p.gamma_set.upper[a] - p.gamma_set.lower[a]);
    }
    if (p.xi_set.kind == XiSet::Kind::box) {
      Vector xi(p.m);
      for (Index a = 0; a < p.m; ++a) {
        const Real u = s.uniform(c++);
        xi[a] = p.xi_set.box.lower[a] +
                (0.1 + 0.8 * u) * (p.xi_set.box.upper[a] - p.xi_set.box.lower[a]);
      }
      cp.xi = XiPoint::at(xi);
    } else {
      const auto count = static_cast<std::uint64_t>(p.xi_set.list.points.size());
      cp.xi = p.list_point(static_cast<int>(s.raw(c++) % count));
    }
    cp.x.resize(p.d);
    for (Index a = 0; a < p.d; ++a) cp.x[a] = s.normal(c++);
    pts.push_back(std::move(cp));
  }
  return pts;
}

}  // namespace

GradientCheckReport check_gradients(const ProblemSpec& problem, const FOracle& oracle,
                                    int num_points, std::uint64_t seed) {
  GradientCheckReport rep;
  rep.points = num_points;
  const Index n = problem.n, m = problem.m;
  const Index nm = n + m;

  for (const auto& cp : interior_points(problem, num_points, seed)) {
    const Vector xi0 = problem.xi_coords(cp.xi);
    const auto eval = [&](const Vector& joint) {
      XiPoint q = cp.xi;
      if (m > 0 && cp.xi.index < 0) q = XiPoint::at(joint.tail(m));
      return oracle.value(cp.x, joint.head(n), q);
    };
    const auto grad_eval = [&](const Vector& joint) {
      XiPoint q = cp.xi;
      if (m > 0 && cp.xi.index < 0) q = XiPoint::at(joint.tail(m));
      return oracle.gradient(cp.x, joint.head(n), q);
    };

    Vector joint(nm);
    joint.head(n) = cp.gamma;
    if (m > 0) joint.tail(m) = xi0;

    const Real v0 = eval(joint);
    const Vector g = oracle.gradient(cp.x, cp.gamma, cp.xi);
    const Matrix h = oracle.hessian(cp.x, cp.gamma, cp.xi);
    if (g.size() != nm || h.rows() != nm || h.cols() != nm) {
      throw InvalidArgument("check_gradients: oracle derivative shapes mismatch");
    }

    // Finite-list problems with m > 0 pin xi, so only the gamma block is
    // checkable by differencing; for m = 0 the blocks coincide anyway.
    const Index vary = (cp.xi.index >= 0) ? n : nm;

    for (Index a = 0; a < vary; ++a) {
      const Real step = 1e-4 * (1.0 + std::abs(joint[a]));
      Vector jp = joint, jm = joint;
      jp[a] += step;
      jm[a] -= step;
      const Real fd = (eval(jp) - eval(jm)) / (2.0 * step);
      rep.max_gradient_error = std::max(
          rep.max_gradient_error, std::abs(fd - g[a]) / (1.0 + std::abs(v0)));

      const Vector gfd = (grad_eval(jp) - grad_eval(jm)) / (2.0 * step);
      for (Index bidx = 0; bidx < vary; ++bidx) {
        rep.max_hessian_error = std::max(
            rep.max_hessian_error,
            std::abs(gfd[bidx] - h(a, bidx)) / (1.0 + std::abs(v0)));
      }
    }
  }
  rep.pass = rep.max_gradient_error <= 1e-5 && rep.max_hessian_error <= 1e-5;
  return rep;
}

GradientCheckReport check_gradients(const ProblemSpec& problem, int num_points,
                                    std::uint64_t seed) {
  return check_gradients(problem, problem.oracle(), num_points, seed);
}

}  // namespace minimax
