#pragma once

#include "minimax/types.hpp"

#include <optional>
#include <vector>

namespace minimax {

// One monomial c * prod_i gamma_i^{gpow_i} * prod_j xi_j^{xpow_j}, optionally
// times a single data coordinate x_{x_index}. Data enters linearly only; this
// is what lets empirical means collapse exactly onto column means.
struct PolyTerm {
  Real coef = 0.0;
  std::vector<int> gpow;  // size n
  std::vector<int> xpow;  // size m (may be empty)
  int x_index = -1;       // -1: deterministic term
};

class Polynomial {
 public:
  Polynomial() = default;
  Polynomial(Index n, Index m, std::vector<PolyTerm> terms);

  Index n() const { return n_; }
  Index m() const { return m_; }
  const std::vector<PolyTerm>& terms() const { return terms_; }

  // Smallest data dimension this polynomial can be evaluated with.
  Index min_data_dim() const;

  Real value(const Vector& gamma, const Vector& xi, const Vector& x) const;
  // Joint first/second derivatives in (gamma, xi); gamma block first.
  Vector gradient(const Vector& gamma, const Vector& xi, const Vector& x) const;
  Matrix hessian(const Vector& gamma, const Vector& xi, const Vector& x) const;

  // Substitute fixed data values (e.g. column means); the result has no data
  // factors. Exact because every data factor is linear.
  Polynomial collapse(const Vector& x) const;
  // E[X] = 0 for the standard-normal sampler, so the population objective
  // just drops the data terms.
  Polynomial population() const;

  Polynomial scaled(Real s) const;
  Polynomial plus(const Polynomial& other) const;

 private:
  Index n_ = 0;
  Index m_ = 0;
  std::vector<PolyTerm> terms_;
};

// Convenience builder: term(c, {gamma exponents}, {xi exponents}, x_index).
PolyTerm term(Real c, std::vector<int> gpow, std::vector<int> xpow = {},
              int x_index = -1);

}  // namespace minimax
