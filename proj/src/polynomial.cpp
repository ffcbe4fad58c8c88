#include "minimax/polynomial.hpp"

namespace minimax {

namespace {

Real ipow(Real base, int e) {
  Real r = 1.0;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

// d^k/dv^k of v^e evaluated at v, k in {0,1,2}.
Real pow_deriv(Real v, int e, int k) {
  if (e < k) return 0.0;
  Real c = 1.0;
  for (int i = 0; i < k; ++i) c *= static_cast<Real>(e - i);
  return c * ipow(v, e - k);
}

}  // namespace

Polynomial::Polynomial(Index n, Index m, std::vector<PolyTerm> terms)
    : n_(n), m_(m), terms_(std::move(terms)) {
  for (const auto& t : terms_) {
    if (static_cast<Index>(t.gpow.size()) != n_ ||
        static_cast<Index>(t.xpow.size()) != m_) {
      throw InvalidArgument("Polynomial: exponent vector sizes must match (n, m)");
    }
    for (int e : t.gpow)
      if (e < 0) throw InvalidArgument("Polynomial: negative exponent");
    for (int e : t.xpow)
      if (e < 0) throw InvalidArgument("Polynomial: negative exponent");
  }
}

Index Polynomial::min_data_dim() const {
  Index d = 0;
  for (const auto& t : terms_) d = std::max<Index>(d, t.x_index + 1);
  return d;
}

Real Polynomial::value(const Vector& gamma, const Vector& xi, const Vector& x) const {
  if (gamma.size() != n_ || xi.size() != m_) {
    throw InvalidArgument("Polynomial::value: argument dimensions mismatch");
  }
  Real s = 0.0;
  for (const auto& t : terms_) {
    Real v = t.coef;
    for (Index i = 0; i < n_; ++i) v *= ipow(gamma[i], t.gpow[i]);
    for (Index j = 0; j < m_; ++j) v *= ipow(xi[j], t.xpow[j]);
    if (t.x_index >= 0) {
      if (t.x_index >= x.size())
        throw InvalidArgument("Polynomial::value: data vector too short");
      v *= x[t.x_index];
    }
    s += v;
  }
  return s;
}

Vector Polynomial::gradient(const Vector& gamma, const Vector& xi, const Vector& x) const {
  Vector g = Vector::Zero(n_ + m_);
  for (const auto& t : terms_) {
    Real base = t.coef;
    if (t.x_index >= 0) base *= x[t.x_index];
    for (Index a = 0; a < n_ + m_; ++a) {
      Real v = base;
      for (Index i = 0; i < n_; ++i)
        v *= pow_deriv(gamma[i], t.gpow[i], a == i ? 1 : 0);
      for (Index j = 0; j < m_; ++j)
        v *= pow_deriv(xi[j], t.xpow[j], a == n_ + j ? 1 : 0);
      g[a] += v;
    }
  }
  return g;
}

Matrix Polynomial::hessian(const Vector& gamma, const Vector& xi, const Vector& x) const {
  Matrix h = Matrix::Zero(n_ + m_, n_ + m_);
  for (const auto& t : terms_) {
    Real base = t.coef;
    if (t.x_index >= 0) base *= x[t.x_index];
    for (Index a = 0; a < n_ + m_; ++a) {
      for (Index b = a; b < n_ + m_; ++b) {
        Real v = base;
        for (Index i = 0; i < n_; ++i) {
          int k = (a == i ? 1 : 0) + (b == i ? 1 : 0);
          v *= pow_deriv(gamma[i], t.gpow[i], k);
        }
        for (Index j = 0; j < m_; ++j) {
          int k = (a == n_ + j ? 1 : 0) + (b == n_ + j ? 1 : 0);
          v *= pow_deriv(xi[j], t.xpow[j], k);
        }
        h(a, b) += v;
        if (b != a) h(b, a) += v;
      }
    }
  }
  return h;
}

Polynomial Polynomial::collapse(const Vector& x) const {
  std::vector<PolyTerm> out;
  out.reserve(terms_.size());
  for (const auto& t : terms_) {
    PolyTerm c = t;
    if (c.x_index >= 0) {
      if (c.x_index >= x.size())
        throw InvalidArgument("Polynomial::collapse: data vector too short");
      c.coef *= x[c.x_index];
      c.x_index = -1;
    }
    out.push_back(std::move(c));
  }
  return Polynomial(n_, m_, std::move(out));
}

Polynomial Polynomial::population() const {
  std::vector<PolyTerm> out;
  for (const auto& t : terms_) {
    if (t.x_index < 0) out.push_back(t);
  }
  return Polynomial(n_, m_, std::move(out));
}

Polynomial Polynomial::scaled(Real s) const {
  std::vector<PolyTerm> out = terms_;
  for (auto& t : out) t.coef *= s;
  return Polynomial(n_, m_, std::move(out));
}

Polynomial Polynomial::plus(const Polynomial& other) const {
  if (other.n_ != n_ || other.m_ != m_) {
    throw InvalidArgument("Polynomial::plus: dimension mismatch");
  }
  std::vector<PolyTerm> out = terms_;
  out.insert(out.end(), other.terms_.begin(), other.terms_.end());
  return Polynomial(n_, m_, std::move(out));
}

PolyTerm term(Real c, std::vector<int> gpow, std::vector<int> xpow, int x_index) {
  PolyTerm t;
  t.coef = c;
  t.gpow = std::move(gpow);
  t.xpow = std::move(xpow);
  t.x_index = x_index;
  return t;
}

}  // namespace minimax
