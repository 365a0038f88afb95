#pragma once

#include <array>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "mvlab/expr.hpp"

namespace mvlab {

/// sin/cos(2pi k t / T), with the time reduced modulo T first. Shared by the
/// tree evaluator and the compiled form so both agree bit-for-bit.
double time_atom_value(bool is_sin, int k, double period, double t) noexcept;

/// Non-coordinate factor of a monomial.
struct PolyAtom {
  enum Kind : int { kSin = 0, kCos = 1, kObs = 2 };
  Kind kind = kSin;
  int k = 0;                     // time frequency
  std::array<int, 3> alpha{};    // observable multi-index
  int alpha_len = 0;

  auto operator<=>(const PolyAtom&) const = default;
};

struct PolyKey {
  std::array<int, 3> xpow{};
  std::vector<PolyAtom> atoms;  // sorted, with repetition

  auto operator<=>(const PolyKey&) const = default;
};

/// A polynomial in the coordinates whose coefficients are polynomials in
/// time atoms and observables; the canonical expanded form of an Expr.
class Poly {
 public:
  Poly() = default;
  explicit Poly(double period) : period_(period) {}
  static Poly from_expr(const Expr& e, double period);

  Poly operator+(const Poly& o) const;
  Poly operator-(const Poly& o) const;
  Poly operator*(const Poly& o) const;
  Poly scaled(double c) const;

  Poly derivative_x(int i) const;
  Poly derivative_t() const;

  bool is_zero() const noexcept { return terms_.empty(); }
  const std::map<PolyKey, double>& terms() const noexcept { return terms_; }
  double period() const noexcept { return period_; }
  int degree() const noexcept;
  std::vector<std::vector<int>> observables() const;

  /// Reference evaluation with moments taken from `mu`.
  double evaluate(double t, std::span<const double> x, const ParticleCloud& mu) const;

 private:
  void add_term(const PolyKey& key, double c);
  double period_ = 1.0;
  std::map<PolyKey, double> terms_;
};

/// Observable values keyed by multi-index, supplied at bind time.
using ObservableLookup = std::function<double(const std::vector<int>&)>;

/// Poly with time and observables fixed: a plain polynomial in x.
class BoundPoly {
 public:
  BoundPoly() = default;
  BoundPoly(const Poly& p, int dim, double t, const ObservableLookup& obs);

  double operator()(const double* x) const noexcept {
    if (dim_ == 1) {
      const double v = x[0];
      double r = dense_[max_deg_];
      for (int k = max_deg_ - 1; k >= 0; --k) r = r * v + dense_[k];
      return r;
    }
    return eval_sparse(x);
  }

  bool is_zero() const noexcept { return zero_; }
  /// True when the value does not depend on x.
  bool is_constant() const noexcept { return constant_; }
  double constant_value() const noexcept { return dense_[0]; }
  /// Horner coefficients, lowest first; meaningful for dim 1 only.
  int dense_degree() const noexcept { return max_deg_; }
  const double* dense() const noexcept { return dense_.data(); }

 private:
  double eval_sparse(const double* x) const noexcept;

  struct Term {
    std::array<int, 3> xpow;
    double c;
  };
  int dim_ = 1;
  int max_deg_ = 0;
  bool zero_ = true;
  bool constant_ = true;
  std::array<double, kMaxPolyDegree + 1> dense_{};
  std::vector<Term> sparse_;
};

}  // namespace mvlab
