#include "mvlab/poly.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mvlab/error.hpp"
#include "mvlab/measure.hpp"

namespace mvlab {

double time_atom_value(bool is_sin, int k, double period, double t) noexcept {
  const double phase = std::fmod(t, period);
  const double arg = 2.0 * std::numbers::pi * k * phase / period;
  return is_sin ? std::sin(arg) : std::cos(arg);
}

void Poly::add_term(const PolyKey& key, double c) {
  if (c == 0.0) return;
  auto [it, inserted] = terms_.try_emplace(key, c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0.0) terms_.erase(it);
  }
}

Poly Poly::from_expr(const Expr& e, double period) {
  Poly p(period);
  switch (e.kind()) {
    case ExprKind::kConstant:
      p.add_term(PolyKey{}, e.value());
      return p;
    case ExprKind::kCoordinate: {
      PolyKey key;
      key.xpow[e.index()] = 1;
      p.add_term(key, 1.0);
      return p;
    }
    case ExprKind::kSin:
    case ExprKind::kCos: {
      if (e.period() != period) throw ConfigError("time atom period differs from the model period");
      if (e.frequency() == 0) {
        p.add_term(PolyKey{}, e.kind() == ExprKind::kSin ? 0.0 : 1.0);
        return p;
      }
      PolyAtom a;
      a.kind = e.kind() == ExprKind::kSin ? PolyAtom::kSin : PolyAtom::kCos;
      a.k = e.frequency();
      PolyKey key;
      key.atoms.push_back(a);
      p.add_term(key, 1.0);
      return p;
    }
    case ExprKind::kObservable: {
      PolyAtom a;
      a.kind = PolyAtom::kObs;
      a.alpha_len = static_cast<int>(e.alpha().size());
      std::copy(e.alpha().begin(), e.alpha().end(), a.alpha.begin());
      PolyKey key;
      key.atoms.push_back(a);
      p.add_term(key, 1.0);
      return p;
    }
    case ExprKind::kAdd:
      return from_expr(e.lhs(), period) + from_expr(e.rhs(), period);
    case ExprKind::kSub:
      return from_expr(e.lhs(), period) - from_expr(e.rhs(), period);
    case ExprKind::kMul:
      return from_expr(e.lhs(), period) * from_expr(e.rhs(), period);
    case ExprKind::kNeg:
      return from_expr(e.lhs(), period).scaled(-1.0);
    case ExprKind::kPow: {
      const Poly base = from_expr(e.lhs(), period);
      Poly r(period);
      r.add_term(PolyKey{}, 1.0);
      for (int i = 0; i < e.exponent(); ++i) r = r * base;
      return r;
    }
  }
  return p;
}

Poly Poly::operator+(const Poly& o) const {
  Poly r = *this;
  for (const auto& [k, c] : o.terms_) r.add_term(k, c);
  return r;
}

Poly Poly::operator-(const Poly& o) const {
  Poly r = *this;
  for (const auto& [k, c] : o.terms_) r.add_term(k, -c);
  return r;
}

Poly Poly::operator*(const Poly& o) const {
  Poly r(period_);
  for (const auto& [ka, ca] : terms_)
    for (const auto& [kb, cb] : o.terms_) {
      PolyKey key;
      for (int i = 0; i < 3; ++i) key.xpow[i] = ka.xpow[i] + kb.xpow[i];
      key.atoms = ka.atoms;
      key.atoms.insert(key.atoms.end(), kb.atoms.begin(), kb.atoms.end());
      std::sort(key.atoms.begin(), key.atoms.end());
      r.add_term(key, ca * cb);
    }
  return r;
}

Poly Poly::scaled(double c) const {
  Poly r(period_);
  for (const auto& [k, v] : terms_) r.add_term(k, v * c);
  return r;
}

Poly Poly::derivative_x(int i) const {
  Poly r(period_);
  for (const auto& [k, c] : terms_) {
    if (k.xpow[i] == 0) continue;
    PolyKey key = k;
    key.xpow[i] -= 1;
    r.add_term(key, c * k.xpow[i]);
  }
  return r;
}

Poly Poly::derivative_t() const {
  Poly r(period_);
  const double w = 2.0 * std::numbers::pi / period_;
  for (const auto& [k, c] : terms_) {
    for (std::size_t j = 0; j < k.atoms.size(); ++j) {
      const PolyAtom& a = k.atoms[j];
      if (a.kind == PolyAtom::kObs) continue;
      PolyKey key = k;
      PolyAtom& b = key.atoms[j];
      double factor = w * a.k;
      if (a.kind == PolyAtom::kSin) {
        b.kind = PolyAtom::kCos;
      } else {
        b.kind = PolyAtom::kSin;
        factor = -factor;
      }
      std::sort(key.atoms.begin(), key.atoms.end());
      r.add_term(key, c * factor);
    }
  }
  return r;
}

int Poly::degree() const noexcept {
  int d = 0;
  for (const auto& [k, c] : terms_) d = std::max(d, k.xpow[0] + k.xpow[1] + k.xpow[2]);
  return d;
}

std::vector<std::vector<int>> Poly::observables() const {
  std::vector<std::vector<int>> out;
  for (const auto& [k, c] : terms_)
    for (const auto& a : k.atoms) {
      if (a.kind != PolyAtom::kObs) continue;
      std::vector<int> alpha(a.alpha.begin(), a.alpha.begin() + a.alpha_len);
      if (std::find(out.begin(), out.end(), alpha) == out.end()) out.push_back(std::move(alpha));
    }
  return out;
}

namespace {

double atom_value(const PolyAtom& a, double period, double t, const ObservableLookup& obs) {
  if (a.kind == PolyAtom::kObs) return obs(std::vector<int>(a.alpha.begin(), a.alpha.begin() + a.alpha_len));
  return time_atom_value(a.kind == PolyAtom::kSin, a.k, period, t);
}

double int_power(double x, int k) noexcept {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= x;
  return r;
}

}  // namespace

double Poly::evaluate(double t, std::span<const double> x, const ParticleCloud& mu) const {
  const ObservableLookup obs = [&](const std::vector<int>& alpha) { return moment(mu, alpha); };
  double sum = 0.0;
  for (const auto& [k, c] : terms_) {
    double v = c;
    for (const auto& a : k.atoms) v *= atom_value(a, period_, t, obs);
    for (int i = 0; i < 3; ++i)
      if (k.xpow[i] > 0) {
        if (i >= static_cast<int>(x.size())) throw DimensionError("polynomial uses a coordinate beyond the point dimension");
        v *= int_power(x[i], k.xpow[i]);
      }
    sum += v;
  }
  return sum;
}

BoundPoly::BoundPoly(const Poly& p, int dim, double t, const ObservableLookup& obs) : dim_(dim) {
  if (dim < 1 || dim > kMaxDim) throw DimensionError("bound polynomial dimension must lie in 1..3");
  std::map<std::array<int, 3>, double> grouped;
  std::map<PolyAtom, double> cache;
  for (const auto& [k, c] : p.terms()) {
    for (int i = dim; i < 3; ++i)
      if (k.xpow[i] > 0) throw DimensionError("polynomial uses a coordinate beyond the model dimension");
    double v = c;
    for (const auto& a : k.atoms) {
      auto it = cache.find(a);
      if (it == cache.end()) it = cache.emplace(a, atom_value(a, p.period(), t, obs)).first;
      v *= it->second;
    }
    grouped[k.xpow] += v;
  }
  for (const auto& [xp, c] : grouped) {
    if (c == 0.0) continue;
    if (!std::isfinite(c)) throw EvalError("bound coefficient", c);
    zero_ = false;
    const int deg = xp[0] + xp[1] + xp[2];
    if (deg > kMaxPolyDegree) throw ConfigError("polynomial degree exceeds 6");
    if (deg > 0) constant_ = false;
    max_deg_ = std::max(max_deg_, deg);
    if (dim == 1) dense_[xp[0]] = c;
    if (deg == 0) dense_[0] = c;
    sparse_.push_back({xp, c});
  }
}

double BoundPoly::eval_sparse(const double* x) const noexcept {
  std::array<std::array<double, kMaxPolyDegree + 1>, 3> pw;
  for (int i = 0; i < dim_; ++i) {
    pw[i][0] = 1.0;
    for (int k = 1; k <= max_deg_; ++k) pw[i][k] = pw[i][k - 1] * x[i];
  }
  double r = 0.0;
  for (const Term& term : sparse_) {
    double v = term.c;
    for (int i = 0; i < dim_; ++i) v *= pw[i][term.xpow[i]];
    r += v;
  }
  return r;
}

}  // namespace mvlab
