#pragma once

#include "minimax/solver.hpp"

#include <optional>

namespace minimax {

struct ActivePoint {
  XiPoint xi;
  Real value = 0.0;
  bool isolated = false;  // finite-list entry; interior box maximizer otherwise
};

// Active inner points of the population objective at gamma_star. Box problems
// reject active points on (or within 1e-7 of) the inner box boundary.
std::vector<ActivePoint> detect_active_set(const ProblemSpec& problem,
                                           const Vector& gamma_star,
                                           Real tau_act = 1e-5);

struct PhiDerivatives {
  Vector grad;  // gradient of the branch function phi_i at gamma_star
  Matrix hess;
};

// Branch derivatives at gamma_star: plain gamma blocks for isolated points,
// the reduced (Schur-complement) curvature for interior maximizers. Interior
// points must be stationary (tol 1e-7) with nonsingular inner Hessian.
PhiDerivatives phi_derivatives(const Objective& objective, const Vector& gamma_star,
                               const ActivePoint& point);

struct MultiplierResult {
  bool unique = false;
  Vector lambda;       // unique case (clipped at 0, sums to 1)
  Matrix vertices;     // polytope case: one vertex per row
  Real residual = 0.0; // first-order system residual
  Real min_sigma_differenced = 0.0;  // affine-independence witness
};

// Convex weights solving sum_i lambda_i grad_i = 0, sum lambda = 1, lambda>=0.
// Unique (least-squares solve) when the gradients are affinely independent;
// otherwise the vertex set of the solution polytope.
MultiplierResult lagrange_multipliers(const std::vector<Vector>& grads,
                                      Real rank_tol = 1e-8, Real residual_tol = 1e-8);

// Basic-feasible-solution enumeration of {lambda >= 0, G lambda = 0,
// sum lambda = 1}; supported for k <= 6, vertices deduplicated at 1e-9.
Matrix lambda_polytope_vertices(const std::vector<Vector>& grads, Real rank_tol = 1e-8);

struct IndexSets {
  std::vector<int> I_plus;  // lambda_i > tau_lambda
  std::vector<int> I_zero;
  Matrix L_basis;           // orthonormal basis of {h : h'grad_i = 0, i in I_plus}, n x dim
};

IndexSets index_sets_and_cones(const std::vector<Vector>& grads, const Vector& lambda,
                               Real tau_lambda = 1e-8, Real rank_tol = 1e-8);

struct Certificate {
  std::string name;
  bool applicable = true;
  bool pass = false;
  Real witness = 0.0;
  std::string detail;
};

struct ReductionData {
  Vector gamma_star;
  std::vector<ActivePoint> active;
  std::vector<PhiDerivatives> phi;
  MultiplierResult multipliers;
  IndexSets index_sets;        // populated in the unique-multiplier case
  Matrix H;                    // sum_i lambda_i hess_i (unique case)
  std::vector<Certificate> certificates;
  Real min_active_separation = 0.0;  // half of it bounds the per-point neighborhoods
  bool strict_complementarity = false;
  bool degenerate_k_n_plus_1 = false;

  Index n() const { return gamma_star.size(); }
  Index k() const { return static_cast<Index>(active.size()); }
  std::vector<Vector> gradients() const;
  bool certificate_passes(const std::string& name) const;
};

struct ReductionOptions {
  Real tau_act = 1e-5;
  Real tau_lambda = 1e-8;
  Real rank_tol = 1e-8;
  std::uint64_t ray_seed = 12345;  // sampled second-order certificate
  int ray_count = 1000;
};

ReductionData reduce_problem(const ProblemSpec& problem, const Vector& gamma_star,
                             const ReductionOptions& options = {});

std::vector<Certificate> check_assumptions(const ProblemSpec& problem,
                                           const ReductionData& reduction,
                                           const ReductionOptions& options = {});

struct DirDerivFormula {
  struct Entry {
    Vector gamma_star;
    std::vector<Real> eta_values;   // per active point
    Real minsup = 0.0;              // max over active points
    std::optional<Real> weighted;   // sum_i lambda_i eta_i when lambda unique
  };
  std::vector<Entry> entries;
  Real minsup = 0.0;                 // min over minimizers
  std::optional<Real> weighted;      // present when every minimizer has unique lambda
};

DirDerivFormula value_dirderiv_formula(const ProblemSpec& problem,
                                       const std::vector<Vector>& minimizers,
                                       const Perturbation& eta,
                                       const ReductionOptions& options = {});

}  // namespace minimax
