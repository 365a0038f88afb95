#pragma once

// Reference computations used only by tests. None of them share code with
// the library paths they check.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

/// min over permutations s of (1/n) sum |a_i - b_s(i)|^p, points in R^d
/// stored row-major. Exhaustive; n <= 8.
inline double assignment_cost(const std::vector<double>& a, const std::vector<double>& b, int d, double p) {
  const std::size_t n = a.size() / static_cast<std::size_t>(d);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double r2 = 0.0;
      for (int k = 0; k < d; ++k) {
        const double diff = a[i * d + k] - b[perm[i] * d + k];
        r2 += diff * diff;
      }
      c += std::pow(std::sqrt(r2), p);
    }
    best = std::min(best, c / static_cast<double>(n));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// W_p between uniform clouds by exhaustive assignment.
inline double wp_uniform(const std::vector<double>& a, const std::vector<double>& b, int d, double p) {
  return std::pow(assignment_cost(a, b, d, p), 1.0 / p);
}

/// W_p between 1-D clouds whose weights are counts/K: every atom is split
/// into unit masses and the resulting uniform problem is solved exhaustively.
inline double wp_rational(const std::vector<double>& xa, const std::vector<int>& ca, const std::vector<double>& xb,
                          const std::vector<int>& cb, double p) {
  std::vector<double> a, b;
  for (std::size_t i = 0; i < xa.size(); ++i) a.insert(a.end(), static_cast<std::size_t>(ca[i]), xa[i]);
  for (std::size_t i = 0; i < xb.size(); ++i) b.insert(b.end(), static_cast<std::size_t>(cb[i]), xb[i]);
  return wp_uniform(a, b, 1, p);
}

/// Classical fourth-order Runge-Kutta for y' = f(t, y).
template <std::size_t K>
std::array<double, K> rk4(const std::function<std::array<double, K>(double, const std::array<double, K>&)>& f,
                          std::array<double, K> y, double t0, double t1, std::size_t steps) {
  const double h = (t1 - t0) / static_cast<double>(steps);
  double t = t0;
  for (std::size_t s = 0; s < steps; ++s) {
    const auto k1 = f(t, y);
    std::array<double, K> tmp;
    for (std::size_t i = 0; i < K; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
    const auto k2 = f(t + 0.5 * h, tmp);
    for (std::size_t i = 0; i < K; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
    const auto k3 = f(t + 0.5 * h, tmp);
    for (std::size_t i = 0; i < K; ++i) tmp[i] = y[i] + h * k3[i];
    const auto k4 = f(t + h, tmp);
    for (std::size_t i = 0; i < K; ++i) y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    t = t0 + static_cast<double>(s + 1) * h;
  }
  return y;
}

/// Mean-field OU dX = (-a X + b E X + c sin t) dt + sigma dW.
/// Closed moment system for m = E X and q = E X^2:
///   m' = (b - a) m + c sin t
///   q' = -2a q + 2b m^2 + 2c m sin t + sigma^2
struct OuMoments {
  double a = 1.0, b = 0.25, c = 1.0, sigma = 1.0;

  std::array<double, 2> rhs(double t, const std::array<double, 2>& y) const {
    const double s = std::sin(t);
    return {(b - a) * y[0] + c * s, -2.0 * a * y[1] + 2.0 * b * y[0] * y[0] + 2.0 * c * y[0] * s + sigma * sigma};
  }

  /// (m, q) at t1 from (m0, q0) at t0.
  std::array<double, 2> flow(std::array<double, 2> y0, double t0, double t1, std::size_t steps_per_unit = 2000) const {
    const auto steps = static_cast<std::size_t>(std::ceil((t1 - t0) * static_cast<double>(steps_per_unit)));
    return rk4<2>([this](double t, const std::array<double, 2>& y) { return rhs(t, y); }, y0, t0, t1,
                  std::max<std::size_t>(steps, 1));
  }

  /// Point of the attracting 2pi-periodic orbit at phase s in [0, 2pi).
  std::array<double, 2> periodic(double s) const {
    const double T = 2.0 * std::numbers::pi;
    const auto y = flow({0.0, 0.0}, 0.0, 40.0 * T);
    return flow(y, 40.0 * T, 40.0 * T + s);
  }

  /// Closed-form periodic mean c (abar sin t - cos t) / (abar^2 + 1), abar = a - b.
  double periodic_mean(double t) const {
    const double ab = a - b;
    return c * (ab * std::sin(t) - std::cos(t)) / (ab * ab + 1.0);
  }
};

/// Sum rounded once: exact in binary128 when all terms lie within
/// 2^-20 .. 2^20 in magnitude and there are at most 2^10 of them.
inline double quad_sum(const std::vector<double>& xs) {
  __float128 s = 0;
  for (double x : xs) s += static_cast<__float128>(x);
  return static_cast<double>(s);
}

inline std::vector<double> random_points(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

}  // namespace oracle
