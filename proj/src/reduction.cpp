#include "minimax/reduction.hpp"

#include "minimax/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace minimax {

namespace {

constexpr Real kInf = std::numeric_limits<Real>::infinity();

Real smallest_singular_value(const Matrix& a) {
  if (a.rows() == 0 || a.cols() == 0) return kInf;
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues().minCoeff();
}

}  // namespace

std::vector<ActivePoint> detect_active_set(const ProblemSpec& problem,
                                           const Vector& gamma_star, Real tau_act) {
  if (gamma_star.size() != problem.n)
    throw InvalidArgument("detect_active_set: gamma has dimension " +
                          std::to_string(gamma_star.size()) + ", problem has n = " +
                          std::to_string(problem.n));
  PopulationObjective obj(problem);
  std::vector<ActivePoint> active;
  if (problem.finite()) {
    const Index k = problem.branch_count();
    std::vector<Real> vals(static_cast<std::size_t>(k));
    Real top = -kInf;
    for (Index i = 0; i < k; ++i) {
      vals[static_cast<std::size_t>(i)] = obj.value(gamma_star, problem.list_point(static_cast<int>(i)));
      top = std::max(top, vals[static_cast<std::size_t>(i)]);
    }
    const Real cut = top - tau_act * (1.0 + std::abs(top));
    for (Index i = 0; i < k; ++i)
      if (vals[static_cast<std::size_t>(i)] >= cut)
        active.push_back({problem.list_point(static_cast<int>(i)),
                          vals[static_cast<std::size_t>(i)], true});
  } else {
    auto reps = inner_maximize(obj, gamma_star);
    if (reps.empty()) throw NumericalError("detect_active_set: inner maximization found no point");
    const Real top = reps.front().value;
    const Real cut = top - tau_act * (1.0 + std::abs(top));
    for (const auto& r : reps) {
      if (r.value < cut) continue;
      if (problem.xi_set.box.boundary_distance(r.xi.coords) <= 1e-7)
        throw AssumptionViolation(
            "active inner maximizer lies on the boundary of the inner box; "
            "interior-maximizer analysis does not apply");
      active.push_back({r.xi, r.value, false});
    }
  }
  return active;
}

PhiDerivatives phi_derivatives(const Objective& objective, const Vector& gamma_star,
                               const ActivePoint& point) {
  PhiDerivatives out;
  if (point.isolated) {
    out.grad = objective.gamma_gradient(gamma_star, point.xi);
    out.hess = objective.gamma_hessian(gamma_star, point.xi);
    return out;
  }
  const Vector gx = objective.xi_gradient(gamma_star, point.xi);
  if (gx.lpNorm<Eigen::Infinity>() > 1e-7)
    throw AssumptionViolation("inner point is not stationary (|grad| = " +
                              std::to_string(gx.lpNorm<Eigen::Infinity>()) +
                              "); branch derivatives are undefined");
  const Matrix hxx = objective.xi_hessian(gamma_star, point.xi);
  if (smallest_singular_value(hxx) < 1e-8)
    throw AssumptionViolation("inner Hessian is singular at an active maximizer; "
                              "the reduced branch curvature is undefined");
  const Matrix hgx = objective.cross_hessian(gamma_star, point.xi);  // n x m
  out.grad = objective.gamma_gradient(gamma_star, point.xi);
  Eigen::FullPivLU<Matrix> lu(hxx);
  out.hess = objective.gamma_hessian(gamma_star, point.xi) - hgx * lu.solve(hgx.transpose());
  return out;
}

MultiplierResult lagrange_multipliers(const std::vector<Vector>& grads, Real rank_tol,
                                      Real residual_tol) {
  if (grads.empty()) throw InvalidArgument("lagrange_multipliers: no gradients");
  const Index k = static_cast<Index>(grads.size());
  const Index n = grads[0].size();
  Real grad_scale = 0.0;
  for (const auto& g : grads) grad_scale = std::max(grad_scale, g.norm());

  MultiplierResult res;
  res.min_sigma_differenced = kInf;
  if (k >= 2) {
    // Affine independence needs rank k-1, impossible with more than n+1 points.
    if (k - 1 > n) {
      res.min_sigma_differenced = 0.0;
    } else {
      Matrix d(n, k - 1);
      for (Index i = 0; i + 1 < k; ++i)
        d.col(i) = grads[static_cast<std::size_t>(i)] - grads.back();
      res.min_sigma_differenced = smallest_singular_value(d);
    }
  }

  Matrix e_mat(n + 1, k);
  for (Index i = 0; i < k; ++i) e_mat.col(i).head(n) = grads[static_cast<std::size_t>(i)];
  e_mat.row(n).setOnes();
  Vector rhs = Vector::Zero(n + 1);
  rhs(n) = 1.0;

  const bool indep = (k == 1) || res.min_sigma_differenced >= rank_tol;
  if (indep) {
    Vector lam = e_mat.completeOrthogonalDecomposition().solve(rhs);
    res.residual = (e_mat * lam - rhs).norm();
    if (res.residual > residual_tol * (1.0 + grad_scale))
      throw AssumptionViolation("first-order optimality system has no convex-weight "
                                "solution at gamma_star (residual " +
                                std::to_string(res.residual) + ")");
    for (Index i = 0; i < k; ++i) {
      if (lam(i) < -1e-10)
        throw AssumptionViolation("first-order optimality weights are negative at "
                                  "gamma_star; the point is not a minimax solution");
      lam(i) = std::max(lam(i), 0.0);
    }
    res.unique = true;
    res.lambda = lam;
    return res;
  }

  res.vertices = lambda_polytope_vertices(grads, rank_tol);
  if (res.vertices.rows() == 0)
    throw AssumptionViolation("first-order optimality system has no convex-weight "
                              "solution at gamma_star");
  res.unique = false;
  res.residual = 0.0;
  for (Index v = 0; v < res.vertices.rows(); ++v)
    res.residual = std::max(res.residual,
                            (e_mat * res.vertices.row(v).transpose() - rhs).norm());
  return res;
}

Matrix lambda_polytope_vertices(const std::vector<Vector>& grads, Real rank_tol) {
  const Index k = static_cast<Index>(grads.size());
  if (k == 0) throw InvalidArgument("lambda_polytope_vertices: no gradients");
  if (k > 6)
    throw CapabilityError("multiplier polytope enumeration supports at most 6 active "
                          "points, got " + std::to_string(k));
  const Index n = grads[0].size();
  Real grad_scale = 0.0;
  for (const auto& g : grads) grad_scale = std::max(grad_scale, g.norm());

  Matrix e_mat(n + 1, k);
  for (Index i = 0; i < k; ++i) e_mat.col(i).head(n) = grads[static_cast<std::size_t>(i)];
  e_mat.row(n).setOnes();
  Vector rhs = Vector::Zero(n + 1);
  rhs(n) = 1.0;

  Eigen::JacobiSVD<Matrix> svd(e_mat);
  const Real sig_max = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  const Real thresh = rank_tol * std::max(1.0, sig_max);
  Index rank = 0;
  for (Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > thresh) ++rank;
  if (rank == 0 || rank > k) return Matrix(0, k);

  std::vector<Vector> found;
  std::vector<int> subset(static_cast<std::size_t>(rank));
  // lexicographic enumeration of size-r subsets of {0..k-1}
  std::vector<int> idx(static_cast<std::size_t>(rank));
  for (Index i = 0; i < rank; ++i) idx[static_cast<std::size_t>(i)] = static_cast<int>(i);
  bool more = true;
  while (more) {
    Matrix eb(n + 1, rank);
    for (Index c = 0; c < rank; ++c) eb.col(c) = e_mat.col(idx[static_cast<std::size_t>(c)]);
    if (smallest_singular_value(eb) > thresh) {
      Vector lam_b = eb.completeOrthogonalDecomposition().solve(rhs);
      const Real resid = (eb * lam_b - rhs).norm();
      bool ok = resid <= 1e-8 * (1.0 + grad_scale);
      for (Index c = 0; ok && c < rank; ++c)
        if (lam_b(c) < -1e-9) ok = false;
      if (ok) {
        Vector lam = Vector::Zero(k);
        for (Index c = 0; c < rank; ++c)
          lam(idx[static_cast<std::size_t>(c)]) = std::max(lam_b(c), 0.0);
        bool dup = false;
        for (const auto& prev : found)
          if ((prev - lam).lpNorm<Eigen::Infinity>() <= 1e-9) { dup = true; break; }
        if (!dup) found.push_back(lam);
      }
    }
    // advance the subset
    int pos = static_cast<int>(rank) - 1;
    while (pos >= 0 &&
           idx[static_cast<std::size_t>(pos)] == static_cast<int>(k) - (static_cast<int>(rank) - pos))
      --pos;
    if (pos < 0) {
      more = false;
    } else {
      ++idx[static_cast<std::size_t>(pos)];
      for (int j = pos + 1; j < static_cast<int>(rank); ++j)
        idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
  }

  std::sort(found.begin(), found.end(), [](const Vector& a, const Vector& b) {
    for (Index i = 0; i < a.size(); ++i) {
      if (a(i) < b(i)) return true;
      if (a(i) > b(i)) return false;
    }
    return false;
  });
  Matrix out(static_cast<Index>(found.size()), k);
  for (Index v = 0; v < out.rows(); ++v) out.row(v) = found[static_cast<std::size_t>(v)].transpose();
  return out;
}

IndexSets index_sets_and_cones(const std::vector<Vector>& grads, const Vector& lambda,
                               Real tau_lambda, Real rank_tol) {
  const Index k = static_cast<Index>(grads.size());
  if (lambda.size() != k)
    throw InvalidArgument("index_sets_and_cones: lambda/gradient count mismatch");
  const Index n = k ? grads[0].size() : 0;
  IndexSets out;
  for (Index i = 0; i < k; ++i)
    (lambda(i) > tau_lambda ? out.I_plus : out.I_zero).push_back(static_cast<int>(i));

  Matrix a(static_cast<Index>(out.I_plus.size()), n);
  for (std::size_t r = 0; r < out.I_plus.size(); ++r)
    a.row(static_cast<Index>(r)) = grads[static_cast<std::size_t>(out.I_plus[r])].transpose();
  if (a.rows() == 0) {
    out.L_basis = Matrix::Identity(n, n);
    return out;
  }
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullV);
  const Real sig_max = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  const Real thresh = rank_tol * std::max(1.0, sig_max);
  Index rank = 0;
  for (Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > thresh) ++rank;
  out.L_basis = svd.matrixV().rightCols(n - rank);
  return out;
}

std::vector<Vector> ReductionData::gradients() const {
  std::vector<Vector> g;
  g.reserve(phi.size());
  for (const auto& p : phi) g.push_back(p.grad);
  return g;
}

bool ReductionData::certificate_passes(const std::string& name) const {
  for (const auto& c : certificates)
    if (c.name == name) return c.pass;
  return false;
}

namespace {

Real min_pairwise_separation(const std::vector<ActivePoint>& active) {
  Real sep = kInf;
  for (std::size_t i = 0; i < active.size(); ++i)
    for (std::size_t j = i + 1; j < active.size(); ++j) {
      const Vector& a = active[i].xi.coords;
      const Vector& b = active[j].xi.coords;
      if (a.size() == 0 || a.size() != b.size()) continue;  // labeled entries
      sep = std::min(sep, (a - b).norm());
    }
  return sep;
}

}  // namespace

ReductionData reduce_problem(const ProblemSpec& problem, const Vector& gamma_star,
                             const ReductionOptions& options) {
  problem.validate();
  ReductionData rd;
  rd.gamma_star = gamma_star;
  rd.active = detect_active_set(problem, gamma_star, options.tau_act);
  PopulationObjective obj(problem);
  for (const auto& p : rd.active) rd.phi.push_back(phi_derivatives(obj, gamma_star, p));

  const auto grads = rd.gradients();
  rd.multipliers = lagrange_multipliers(grads, options.rank_tol);
  if (rd.multipliers.unique) {
    rd.index_sets = index_sets_and_cones(grads, rd.multipliers.lambda,
                                         options.tau_lambda, options.rank_tol);
    rd.H = Matrix::Zero(problem.n, problem.n);
    for (std::size_t i = 0; i < rd.phi.size(); ++i)
      rd.H += rd.multipliers.lambda(static_cast<Index>(i)) * rd.phi[i].hess;
    rd.strict_complementarity = rd.index_sets.I_zero.empty();
  }
  rd.min_active_separation = min_pairwise_separation(rd.active);
  rd.degenerate_k_n_plus_1 =
      rd.k() == problem.n + 1 && rd.multipliers.unique && rd.strict_complementarity;
  rd.certificates = check_assumptions(problem, rd, options);
  return rd;
}

std::vector<Certificate> check_assumptions(const ProblemSpec& problem,
                                           const ReductionData& reduction,
                                           const ReductionOptions& options) {
  std::vector<Certificate> certs;
  PopulationObjective obj(problem);
  const Index k = reduction.k();

  {
    Certificate c{"finite_active_set", true, k > 0, static_cast<Real>(k),
                  std::to_string(k) + " active inner points"};
    certs.push_back(c);
  }

  bool any_interior = false;
  Real worst_stat = 0.0, worst_sigma = kInf;
  for (const auto& p : reduction.active) {
    if (p.isolated) continue;
    any_interior = true;
    worst_stat = std::max(worst_stat,
                          obj.xi_gradient(reduction.gamma_star, p.xi).lpNorm<Eigen::Infinity>());
    worst_sigma = std::min(worst_sigma,
                           smallest_singular_value(obj.xi_hessian(reduction.gamma_star, p.xi)));
  }
  certs.push_back({"inner_stationarity", any_interior, !any_interior || worst_stat <= 1e-7,
                   any_interior ? worst_stat : 0.0,
                   "max inner gradient norm over interior maximizers"});
  certs.push_back({"inner_hessian_nonsingular", any_interior,
                   !any_interior || worst_sigma >= 1e-8,
                   any_interior ? worst_sigma : kInf,
                   "min singular value of the inner Hessian"});

  certs.push_back({"affine_independence", k > 1,
                   reduction.multipliers.min_sigma_differenced >= options.rank_tol,
                   reduction.multipliers.min_sigma_differenced,
                   "min singular value of differenced branch gradients"});
  certs.push_back({"unique_multipliers", true, reduction.multipliers.unique,
                   reduction.multipliers.residual,
                   "first-order system residual; uniqueness requires affine independence"});

  if (reduction.multipliers.unique) {
    const Real min_lambda = reduction.multipliers.lambda.minCoeff();
    certs.push_back({"strict_complementarity", true, reduction.index_sets.I_zero.empty(),
                     min_lambda, "smallest optimality weight"});

    const Matrix& basis = reduction.index_sets.L_basis;
    if (basis.cols() == 0) {
      certs.push_back({"second_order_strict", false, true, kInf,
                       "critical subspace is trivial"});
      certs.push_back({"second_order_critical_sampled", false, true, kInf,
                       "critical cone is trivial"});
    } else {
      Eigen::SelfAdjointEigenSolver<Matrix> eig(basis.transpose() * reduction.H * basis);
      const Real lam_min = eig.eigenvalues().minCoeff();
      certs.push_back({"second_order_strict", true, lam_min >= 1e-8, lam_min,
                       "min eigenvalue of the curvature restricted to the critical subspace"});

      const auto grads = reduction.gradients();
      rng::CounterStream stream(options.ray_seed);
      const Index dim = basis.cols();
      Real worst_ray = kInf;
      int accepted = 0;
      for (int r = 0; r < options.ray_count; ++r) {
        Vector w(dim);
        for (Index j = 0; j < dim; ++j)
          w(j) = stream.normal(static_cast<std::uint64_t>(r) * static_cast<std::uint64_t>(dim) +
                               static_cast<std::uint64_t>(j));
        Vector h = basis * w;
        const Real hn = h.norm();
        if (hn < 1e-12) continue;
        h /= hn;
        auto feasible = [&](const Vector& v) {
          for (int i0 : reduction.index_sets.I_zero)
            if (v.dot(grads[static_cast<std::size_t>(i0)]) > 1e-12) return false;
          return true;
        };
        if (!feasible(h)) {
          h = -h;
          if (!feasible(h)) continue;
        }
        ++accepted;
        worst_ray = std::min(worst_ray, h.dot(reduction.H * h));
      }
      if (accepted == 0) {
        certs.push_back({"second_order_critical_sampled", false, true, kInf,
                         "no feasible rays sampled; critical cone appears trivial"});
      } else {
        certs.push_back({"second_order_critical_sampled", true, worst_ray >= 1e-8, worst_ray,
                         "min sampled curvature over " + std::to_string(accepted) +
                             " critical-cone rays"});
      }
    }
  } else {
    certs.push_back({"strict_complementarity", false, false, 0.0,
                     "multipliers are not unique"});
    certs.push_back({"second_order_strict", false, false, 0.0,
                     "multipliers are not unique"});
    certs.push_back({"second_order_critical_sampled", false, false, 0.0,
                     "multipliers are not unique"});
  }

  certs.push_back({"degenerate_pinning", reduction.degenerate_k_n_plus_1, true,
                   reduction.degenerate_k_n_plus_1 ? 1.0 : 0.0,
                   "k = n + 1 active points with strict complementarity pin the solution"});
  return certs;
}

DirDerivFormula value_dirderiv_formula(const ProblemSpec& problem,
                                       const std::vector<Vector>& minimizers,
                                       const Perturbation& eta,
                                       const ReductionOptions& options) {
  if (minimizers.empty())
    throw InvalidArgument("value_dirderiv_formula: need at least one minimizer");
  DirDerivFormula out;
  PopulationObjective obj(problem);
  out.minsup = kInf;
  bool all_weighted = true;
  Real weighted_min = kInf;
  for (const auto& gs : minimizers) {
    DirDerivFormula::Entry entry;
    entry.gamma_star = gs;
    auto active = detect_active_set(problem, gs, options.tau_act);
    entry.minsup = -kInf;
    for (const auto& p : active) {
      const Real v = eta.eval(problem, gs, p.xi);
      entry.eta_values.push_back(v);
      entry.minsup = std::max(entry.minsup, v);
    }
    std::vector<Vector> grads;
    for (const auto& p : active) grads.push_back(phi_derivatives(obj, gs, p).grad);
    auto mult = lagrange_multipliers(grads, options.rank_tol);
    if (mult.unique) {
      Real w = 0.0;
      for (std::size_t i = 0; i < entry.eta_values.size(); ++i)
        w += mult.lambda(static_cast<Index>(i)) * entry.eta_values[i];
      entry.weighted = w;
      weighted_min = std::min(weighted_min, w);
    } else {
      all_weighted = false;
    }
    out.minsup = std::min(out.minsup, entry.minsup);
    out.entries.push_back(std::move(entry));
  }
  if (all_weighted) out.weighted = weighted_min;
  return out;
}

}  // namespace minimax
