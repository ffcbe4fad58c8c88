#include "minimax/solver.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace minimax {

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::boundary_hit: return "boundary_hit";
  }
  return "unknown";
}

namespace {

bool lex_less(const Vector& a, const Vector& b) {
  for (Index i = 0; i < std::min(a.size(), b.size()); ++i) {
    if (a[i] != b[i]) return a[i] < b[i];
  }
  return a.size() < b.size();
}

bool point_less(const InnerPoint& a, const InnerPoint& b) {
  if (a.value != b.value) return a.value > b.value;
  if (a.xi.index != b.xi.index) return a.xi.index < b.xi.index;
  return lex_less(a.xi.coords, b.xi.coords);
}

// Gradient with components blocked at active bounds zeroed out (ascent).
Vector projected_ascent_gradient(const Box& box, const Vector& x, const Vector& g) {
  Vector pg = g;
  for (Index i = 0; i < x.size(); ++i) {
    if (x[i] >= box.upper[i] - 1e-12 && g[i] > 0.0) pg[i] = 0.0;
    if (x[i] <= box.lower[i] + 1e-12 && g[i] < 0.0) pg[i] = 0.0;
  }
  return pg;
}

// Projected Newton ascent for the inner problem on a box.
InnerPoint ascend(const Objective& obj, const Vector& gamma, Vector x,
                  const InnerOptions& opt) {
  const Box& box = obj.problem().xi_set.box;
  x = box.project(x);
  Real fx = obj.value(gamma, XiPoint::at(x));
  for (int it = 0; it < opt.max_iterations; ++it) {
    const Vector g = obj.xi_gradient(gamma, XiPoint::at(x));
    if (projected_ascent_gradient(box, x, g).lpNorm<Eigen::Infinity>() <=
        opt.gradient_tol) {
      break;
    }
    const Matrix h = obj.xi_hessian(gamma, XiPoint::at(x));
    Vector dir;
    Eigen::LLT<Matrix> llt(-h);
    if (llt.info() == Eigen::Success) {
      dir = llt.solve(g);  //  -h^{-1} g with the sign folded in
    } else {
      dir = g;
    }
    if (dir.dot(g) <= 0.0) dir = g;

    Real alpha = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 50; ++ls) {
      const Vector cand = box.project(x + alpha * dir);
      const Real fc = obj.value(gamma, XiPoint::at(cand));
      if (fc > fx + 1e-16) {
        x = cand;
        fx = fc;
        moved = true;
        break;
      }
      alpha *= 0.5;
      if (alpha < 1e-14) break;
    }
    if (!moved) break;
  }
  return {XiPoint::at(x), fx};
}

std::vector<Vector> box_starts(const Box& box, const InnerOptions& opt) {
  const Index m = box.dim();
  int per_dim = 5;
  while (per_dim > 2 && std::pow(per_dim, static_cast<double>(m)) > opt.grid_cap) {
    --per_dim;
  }
  std::vector<Vector> starts;
  std::vector<int> idx(m, 0);
  const auto total = static_cast<long>(std::pow(per_dim, static_cast<double>(m)));
  for (long t = 0; t < total && t < opt.grid_cap; ++t) {
    Vector x(m);
    long rem = t;
    for (Index i = 0; i < m; ++i) {
      const int a = static_cast<int>(rem % per_dim);
      rem /= per_dim;
      x[i] = box.lower[i] + (box.upper[i] - box.lower[i]) *
                                (per_dim == 1 ? 0.5 : static_cast<Real>(a) / (per_dim - 1));
    }
    starts.push_back(x);
  }
  // corners
  if (m <= 10) {
    for (long mask = 0; mask < (1L << m); ++mask) {
      Vector x(m);
      for (Index i = 0; i < m; ++i) {
        x[i] = (mask >> i) & 1 ? box.upper[i] : box.lower[i];
      }
      starts.push_back(x);
    }
  }
  return starts;
}

}  // namespace

std::vector<InnerPoint> inner_maximize(const Objective& objective, const Vector& gamma,
                                       const InnerOptions& options) {
  const ProblemSpec& p = objective.problem();
  if (!p.gamma_set.contains(gamma, 1e-9)) {
    throw DomainError("inner_maximize: gamma outside its box");
  }
  std::vector<InnerPoint> out;
  if (p.finite()) {
    for (int i = 0; i < p.branch_count(); ++i) {
      const XiPoint xi = p.list_point(i);
      out.push_back({xi, objective.value(gamma, xi)});
    }
    std::sort(out.begin(), out.end(), point_less);
    return out;
  }

  std::vector<InnerPoint> found;
  for (const Vector& s : box_starts(p.xi_set.box, options)) {
    found.push_back(ascend(objective, gamma, s, options));
  }
  std::sort(found.begin(), found.end(), point_less);
  for (const auto& cand : found) {
    bool merged = false;
    for (const auto& rep : out) {
      if ((rep.xi.coords - cand.xi.coords).norm() <= options.merge_radius) {
        merged = true;  // representative has the higher value by sort order
        break;
      }
    }
    if (!merged) out.push_back(cand);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Epigraph active-set Newton

namespace {

struct NewtonOutcome {
  Vector x;
  Real z = 0.0;
  Vector lambda;
  Real residual = std::numeric_limits<Real>::infinity();
  int iterations = 0;
  bool ok = false;
};

Vector kkt_residual_vec(const std::vector<BranchEval>& evals, const Vector& lambda,
                        Real z) {
  const Index n = evals[0].grad.size();
  const auto q = static_cast<Index>(evals.size());
  Vector r(n + 1 + q);
  r.head(n).setZero();
  for (Index i = 0; i < q; ++i) r.head(n) += lambda[i] * evals[static_cast<size_t>(i)].grad;
  r[n] = lambda.sum() - 1.0;
  for (Index i = 0; i < q; ++i) r[n + 1 + i] = evals[static_cast<size_t>(i)].value - z;
  return r;
}

// Damped Newton on the equalized-branch KKT system for a fixed active set.
NewtonOutcome newton_on_active(BranchFamily& branches, const std::vector<int>& act,
                               Vector x, Vector lambda, Real z, Real tol,
                               int max_iters) {
  NewtonOutcome res;
  const Index n = x.size();
  const auto q = static_cast<Index>(act.size());

  std::vector<BranchEval> evals(act.size());
  for (size_t i = 0; i < act.size(); ++i) evals[i] = branches.eval(x, act[i]);
  Vector r = kkt_residual_vec(evals, lambda, z);
  Real rn = r.lpNorm<Eigen::Infinity>();

  // Iterate to the machine floor, not just to `tol`: near a kink the entry
  // point can pass `tol` while the primal iterate is still ~1e-10 away, which
  // is visible in difference quotients of the optimal value.
  for (int it = 0; it < max_iters; ++it) {
    if (rn <= 1e-14 * (1.0 + std::abs(z))) break;
    Matrix J = Matrix::Zero(n + 1 + q, n + 1 + q);
    for (Index i = 0; i < q; ++i) {
      const auto& e = evals[static_cast<size_t>(i)];
      J.topLeftCorner(n, n) += lambda[i] * e.hess;
      J.block(0, n + 1 + i, n, 1) = e.grad;
      J.block(n + 1 + i, 0, 1, n) = e.grad.transpose();
      J(n + 1 + i, n) = -1.0;
      J(n, n + 1 + i) = 1.0;
    }
    Eigen::FullPivLU<Matrix> lu(J);
    if (!lu.isInvertible()) {
      // one shot of Tikhonov on the primal block, else report stall
      J.topLeftCorner(n, n) += 1e-10 * Matrix::Identity(n, n);
      lu.compute(J);
      if (!lu.isInvertible()) break;
    }
    const Vector step = lu.solve(-r);

    Real alpha = 1.0;
    bool accepted = false;
    while (alpha >= 1e-12) {
      const Vector xc = x + alpha * step.head(n);
      const Real zc = z + alpha * step[n];
      const Vector lc = lambda + alpha * step.tail(q);
      std::vector<BranchEval> ec(act.size());
      for (size_t i = 0; i < act.size(); ++i) ec[i] = branches.eval(xc, act[i]);
      const Vector rc = kkt_residual_vec(ec, lc, zc);
      const Real rcn = rc.lpNorm<Eigen::Infinity>();
      if (rcn <= (1.0 - 1e-4 * alpha) * rn) {
        x = xc;
        z = zc;
        lambda = lc;
        evals = std::move(ec);
        r = rc;
        rn = rcn;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    ++res.iterations;
    if (!accepted) break;
  }
  res.ok = rn <= tol;
  res.x = x;
  res.z = z;
  res.lambda = lambda;
  res.residual = rn;
  return res;
}

}  // namespace

EpigraphResult epigraph_minimize(BranchFamily& branches, const Vector& x0, Real kkt_tol,
                                 Real tau_act, int max_active_set_ops) {
  EpigraphResult out;
  const int count = branches.count();
  if (count <= 0) throw InvalidArgument("epigraph_minimize: no branches");
  Vector x = x0;

  auto all_values = [&](const Vector& at) {
    Vector v(count);
    for (int i = 0; i < count; ++i) v[i] = branches.value(at, i);
    return v;
  };

  Vector vals = all_values(x);
  Real vmax = vals.maxCoeff();
  std::set<int> act;
  for (int i = 0; i < count; ++i) {
    if (vals[i] >= vmax - tau_act * (1.0 + std::abs(vmax))) act.insert(i);
  }

  Vector lambda;
  Real z = vmax;
  int total_newton = 0;

  for (int op = 0; op < max_active_set_ops; ++op) {
    const std::vector<int> act_list(act.begin(), act.end());
    const auto q = static_cast<Index>(act_list.size());
    if (lambda.size() != q) lambda = Vector::Constant(q, 1.0 / static_cast<Real>(q));

    NewtonOutcome nr = newton_on_active(branches, act_list, x, lambda, z, kkt_tol, 100);
    total_newton += nr.iterations;

    if (!nr.ok) {
      // Stalled (typically a singular system when too few branches are
      // active); enlarge the active set with the best remaining branch.
      int add = -1;
      Real best = -std::numeric_limits<Real>::infinity();
      Vector vnow = all_values(nr.x.size() ? nr.x : x);
      for (int i = 0; i < count; ++i) {
        if (!act.count(i) && vnow[i] > best) {
          best = vnow[i];
          add = i;
        }
      }
      if (add < 0) {
        out.x = nr.x.size() ? nr.x : x;
        out.value = all_values(out.x).maxCoeff();
        out.active = act_list;
        out.lambda = nr.lambda;
        out.residual = nr.residual;
        out.iterations = total_newton;
        out.converged = false;
        return out;
      }
      act.insert(add);
      lambda.resize(0);
      continue;
    }

    x = nr.x;
    z = nr.z;
    lambda = nr.lambda;

    // Drop branches with meaningfully negative multipliers.
    Index worst = -1;
    Real worst_val = -1e-8;
    for (Index i = 0; i < q; ++i) {
      if (lambda[i] < worst_val) {
        worst_val = lambda[i];
        worst = i;
      }
    }
    if (worst >= 0 && q > 1) {
      act.erase(act_list[static_cast<size_t>(worst)]);
      lambda.resize(0);
      continue;
    }

    // Add branches that rose above the epigraph level.
    vals = all_values(x);
    int violator = -1;
    Real vio = tau_act * (1.0 + std::abs(z));
    for (int i = 0; i < count; ++i) {
      if (!act.count(i) && vals[i] - z > vio) {
        vio = vals[i] - z;
        violator = i;
      }
    }
    if (violator >= 0) {
      act.insert(violator);
      lambda.resize(0);
      continue;
    }

    out.x = x;
    out.value = vals.maxCoeff();
    out.active = act_list;
    out.lambda = lambda;
    out.residual = nr.residual;
    out.iterations = total_newton;
    out.converged = true;
    return out;
  }

  out.x = x;
  out.value = all_values(x).maxCoeff();
  out.active = std::vector<int>(act.begin(), act.end());
  out.lambda = lambda;
  out.iterations = total_newton;
  out.converged = false;
  return out;
}

// ---------------------------------------------------------------------------
// Outer minimization

namespace {

// Branch family view of the outer problem: finite lists map one branch per
// listed point; box problems track one inner maximizer per cluster
// representative, re-ascending from the previous location after each gamma
// move (Danskin gradient, Schur-complement Hessian).
class OuterBranches : public BranchFamily {
 public:
  OuterBranches(const Objective& obj, const std::vector<InnerPoint>& reps,
                const InnerOptions& inner)
      : obj_(&obj), inner_(inner) {
    if (obj.problem().finite()) {
      for (int i = 0; i < obj.problem().branch_count(); ++i) {
        points_.push_back(obj.problem().list_point(i));
      }
    } else {
      for (const auto& r : reps) points_.push_back(r.xi);
    }
  }

  int count() const override { return static_cast<int>(points_.size()); }

  Real value(const Vector& x, int i) override {
    refresh(x, i);
    return obj_->value(x, points_[static_cast<size_t>(i)]);
  }

  BranchEval eval(const Vector& x, int i) override {
    refresh(x, i);
    const XiPoint& xi = points_[static_cast<size_t>(i)];
    BranchEval e;
    e.value = obj_->value(x, xi);
    e.grad = obj_->gamma_gradient(x, xi);
    if (obj_->problem().finite()) {
      e.hess = obj_->gamma_hessian(x, xi);
    } else {
      const Matrix hxx = obj_->xi_hessian(x, xi);
      const Matrix hgx = obj_->cross_hessian(x, xi);
      const Matrix hgg = obj_->gamma_hessian(x, xi);
      // interior maximizer: reduced curvature through the inner response
      Eigen::FullPivLU<Matrix> lu(hxx);
      if (!lu.isInvertible()) {
        throw AssumptionViolation(
            "outer solve: inner Hessian singular at tracked maximizer");
      }
      e.hess = hgg - hgx * lu.solve(hgx.transpose());
    }
    return e;
  }

  const std::vector<XiPoint>& points() const { return points_; }

 private:
  void refresh(const Vector& x, int i) {
    if (obj_->problem().finite()) return;
    auto& xi = points_[static_cast<size_t>(i)];
    InnerOptions local = inner_;
    local.max_iterations = 60;
    const InnerPoint moved = ascend(*obj_, x, xi.coords, local);
    xi = moved.xi;
  }

  const Objective* obj_;
  InnerOptions inner_;
  std::vector<XiPoint> points_;
};

Real phi_value(const Objective& obj, const Vector& gamma, const InnerOptions& inner) {
  return inner_maximize(obj, gamma, inner)[0].value;
}

std::vector<Vector> gamma_grid(const Box& box, int cap) {
  const Index n = box.dim();
  int per_dim = 9;
  while (per_dim > 2 && std::pow(per_dim, static_cast<double>(n)) > cap) --per_dim;
  std::vector<Vector> pts;
  const auto total = static_cast<long>(std::pow(per_dim, static_cast<double>(n)));
  for (long t = 0; t < total && t < cap; ++t) {
    Vector x(n);
    long rem = t;
    for (Index i = 0; i < n; ++i) {
      const int a = static_cast<int>(rem % per_dim);
      rem /= per_dim;
      x[i] = box.lower[i] + (box.upper[i] - box.lower[i]) *
                                (per_dim == 1 ? 0.5 : static_cast<Real>(a) / (per_dim - 1));
    }
    pts.push_back(x);
  }
  return pts;
}

}  // namespace

MinimaxSolution outer_minimize(const Objective& objective, const OuterOptions& options) {
  const ProblemSpec& p = objective.problem();
  const Box& box = p.gamma_set;

  // Phase 1a: coarse grid.
  Vector best;
  Real best_phi = std::numeric_limits<Real>::infinity();
  for (const Vector& g : gamma_grid(box, options.grid_cap)) {
    const Real v = phi_value(objective, g, options.inner);
    if (v < best_phi) {
      best_phi = v;
      best = g;
    }
  }

  // Phase 1b: projected subgradient polish.
  const Real c = box.diameter() / 10.0;
  Vector x = best;
  for (int t = 1; t <= options.subgradient_steps; ++t) {
    const auto reps = inner_maximize(objective, x, options.inner);
    if (reps[0].value < best_phi) {
      best_phi = reps[0].value;
      best = x;
    }
    const Vector sg = objective.gamma_gradient(x, reps[0].xi);
    x = box.project(x - (c / std::sqrt(static_cast<Real>(t))) * sg);
  }
  {
    const Real v = phi_value(objective, x, options.inner);
    if (v < best_phi) {
      best_phi = v;
      best = x;
    }
  }

  // Phase 1c: compass-search shrink. The subgradient iterates stall at
  // O(step) distance from kinks; shrinking axis steps close that gap so the
  // Newton phase starts with the correct branch set.
  x = best;
  Real step = std::max(c / std::sqrt(static_cast<Real>(std::max(options.subgradient_steps, 1))),
                       1e-4);
  while (step > 1e-10) {
    bool improved = false;
    for (Index i = 0; i < x.size(); ++i) {
      for (const Real s : {step, -step}) {
        Vector cand = x;
        cand[i] = std::clamp(cand[i] + s, box.lower[i], box.upper[i]);
        const Real v = phi_value(objective, cand, options.inner);
        if (v < best_phi - 1e-15) {
          best_phi = v;
          x = cand;
          improved = true;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  best = x;

  // Phase 2: active-branch Newton on the epigraph system.
  const auto reps = inner_maximize(objective, best, options.inner);
  std::vector<InnerPoint> tracked;
  const Real keep = 1e-3 * (1.0 + std::abs(reps[0].value));
  for (const auto& r : reps) {
    if (p.finite() || reps[0].value - r.value <= keep) tracked.push_back(r);
  }
  OuterBranches branches(objective, tracked, options.inner);
  EpigraphResult epi = epigraph_minimize(branches, best, options.kkt_tol,
                                         options.tau_act, options.max_active_set_ops);

  MinimaxSolution sol;
  // Strict comparison with ties to the Newton point. When the minimizer sits
  // exactly on a candidate already evaluated (a kink pinned at a grid point),
  // the incumbent's value is exactly lower than any Newton iterate that
  // stalled a few ulps away, and returning the incumbent preserves the exact
  // solution; everywhere else the Newton point is the more accurate one.
  if (epi.converged && epi.value <= best_phi) {
    sol.gamma_hat = epi.x;
  } else {
    sol.gamma_hat = best;
  }
  sol.gamma_hat = box.project(sol.gamma_hat);
  sol.inner_maximizers = inner_maximize(objective, sol.gamma_hat, options.inner);
  sol.theta_hat = sol.inner_maximizers[0].value;
  sol.iterations = epi.iterations;
  sol.kkt_residual = epi.residual;
  // A point on the box boundary cannot satisfy the interior KKT system, so
  // classify it before looking at the Newton outcome.
  if (box.boundary_distance(sol.gamma_hat) <= options.boundary_tol) {
    sol.status = SolveStatus::boundary_hit;
  } else if (!epi.converged) {
    sol.status = SolveStatus::max_iter;
  } else {
    sol.status = SolveStatus::converged;
  }
  return sol;
}

MinimaxSolution solve_population(const ProblemSpec& problem, const OuterOptions& options) {
  PopulationObjective obj(problem);
  MinimaxSolution sol = outer_minimize(obj, options);
  sol.source.kind = SourceTag::Kind::population;
  return sol;
}

MinimaxSolution solve_sample(const ProblemSpec& problem, const Dataset& data,
                             const OuterOptions& options) {
  EmpiricalObjective obj(problem, data);
  MinimaxSolution sol = outer_minimize(obj, options);
  sol.source.kind = SourceTag::Kind::sample;
  sol.source.N = data.N();
  sol.source.seed = data.seed;
  sol.source.synthetic = !data.from_sampler;
  return sol;
}

// ---------------------------------------------------------------------------
// Directional derivative of the optimal value by differencing

Perturbation Perturbation::constants(const ProblemSpec& problem,
                                     const std::vector<Real>& values) {
  if (!problem.finite() || static_cast<Index>(values.size()) != problem.branch_count()) {
    throw InvalidArgument("Perturbation::constants needs one value per listed point");
  }
  Perturbation eta;
  for (const Real v : values) {
    eta.branch.push_back(
        Polynomial(problem.n, 0, {term(v, std::vector<int>(problem.n, 0))}));
  }
  return eta;
}

Real Perturbation::eval(const ProblemSpec& problem, const Vector& gamma,
                        const XiPoint& xi) const {
  if (!branch.empty()) {
    if (xi.index < 0 || xi.index >= static_cast<int>(branch.size())) {
      throw DomainError("Perturbation: branch index out of range");
    }
    return branch[static_cast<size_t>(xi.index)].value(gamma, problem.xi_coords(xi),
                                                       Vector(0));
  }
  if (!shared) throw InvalidArgument("Perturbation: empty");
  return shared->value(gamma, problem.xi_coords(xi), Vector(0));
}

std::vector<Real> default_dirderiv_grid() { return {1e-1, 3e-2, 1e-2, 3e-3, 1e-3}; }

namespace {

ProblemSpec perturbed_population(const ProblemSpec& problem, const Perturbation& eta,
                                 Real t) {
  ProblemSpec q = problem;
  q.d = 0;
  q.truth = GroundTruth{};
  q.name = problem.name + "+perturbation";
  if (!q.branch_polys.empty()) {
    if (eta.branch.size() != q.branch_polys.size()) {
      throw InvalidArgument("value_dirderiv_fd: eta must supply one polynomial per branch");
    }
    for (size_t i = 0; i < q.branch_polys.size(); ++i) {
      q.branch_polys[i] = q.branch_polys[i].population().plus(eta.branch[i].scaled(t));
    }
  } else {
    if (!eta.shared) {
      throw InvalidArgument("value_dirderiv_fd: eta must be a shared polynomial here");
    }
    q.shared_poly = q.shared_poly->population().plus(eta.shared->scaled(t));
  }
  q.validate();
  return q;
}

}  // namespace

DirDerivEstimate value_dirderiv_fd(const ProblemSpec& problem, const Perturbation& eta,
                                   const std::vector<Real>& t_grid,
                                   const OuterOptions& options) {
  if (t_grid.size() < 2) throw InvalidArgument("value_dirderiv_fd: need at least two t values");
  for (const Real t : t_grid) {
    if (t <= 0.0) throw InvalidArgument("value_dirderiv_fd: t values must be positive");
  }
  DirDerivEstimate est;
  est.t_grid = t_grid;

  const MinimaxSolution base = solve_population(problem, options);
  est.base_value = base.theta_hat;

  for (const Real t : t_grid) {
    const ProblemSpec pert = perturbed_population(problem, eta, t);
    const MinimaxSolution sol = solve_population(pert, options);
    est.quotients.push_back((sol.theta_hat - est.base_value) / t);
  }

  const size_t last = est.quotients.size() - 1;
  const Real t1 = t_grid[last - 1], t2 = t_grid[last];
  const Real q1 = est.quotients[last - 1], q2 = est.quotients[last];
  est.estimate = (t1 * q2 - t2 * q1) / (t1 - t2);

  bool inc = true, dec = true;
  for (size_t i = 1; i < est.quotients.size(); ++i) {
    inc = inc && est.quotients[i] >= est.quotients[i - 1] - 1e-12;
    dec = dec && est.quotients[i] <= est.quotients[i - 1] + 1e-12;
  }
  est.monotone = inc || dec;
  return est;
}

}  // namespace minimax
