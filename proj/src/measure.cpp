#include "mvlab/measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "mvlab/error.hpp"
#include "mvlab/exact_sum.hpp"
#include "mvlab/rng.hpp"

namespace mvlab {

namespace {

constexpr double kWeightTolerance = 1e-12;

double int_power(double x, int k) noexcept {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= x;
  return r;
}

void require_same_dim(const ParticleCloud& a, const ParticleCloud& b) {
  if (a.dim() != b.dim())
    throw DimensionError("clouds have different dimensions " + std::to_string(a.dim()) + " and " +
                         std::to_string(b.dim()));
}

}  // namespace

ParticleCloud::ParticleCloud(int dim, std::vector<double> positions, std::vector<double> weights, double time)
    : dim_(dim), positions_(std::move(positions)), weights_(std::move(weights)), time_(time) {
  if (dim_ < 1) throw DimensionError("cloud dimension must be positive");
  if (weights_.empty()) throw ConfigError("cloud must contain at least one particle");
  if (positions_.size() != weights_.size() * static_cast<std::size_t>(dim_))
    throw DimensionError("cloud positions do not match N x d");
  ExactSum total;
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("cloud weights must be finite and nonnegative");
    total.add(w);
  }
  if (std::abs(total.value() - 1.0) > kWeightTolerance)
    throw ConfigError("cloud weights sum to " + std::to_string(total.value()) + ", expected 1");
  for (double x : positions_)
    if (!std::isfinite(x)) throw ConfigError("cloud positions must be finite");
  if (!std::isfinite(time_)) throw ConfigError("cloud time stamp must be finite");
}

ParticleCloud ParticleCloud::uniform(int dim, std::vector<double> positions, double time) {
  if (dim < 1) throw DimensionError("cloud dimension must be positive");
  const std::size_t n = positions.size() / static_cast<std::size_t>(dim);
  if (n == 0) throw ConfigError("cloud must contain at least one particle");
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  return ParticleCloud(dim, std::move(positions), std::move(w), time);
}

ParticleCloud ParticleCloud::point_mass(std::span<const double> x, double time) {
  return ParticleCloud(static_cast<int>(x.size()), std::vector<double>(x.begin(), x.end()), {1.0}, time);
}

ParticleCloud ParticleCloud::with_time(double t) const {
  ParticleCloud copy = *this;
  copy.time_ = t;
  return copy;
}

ParticleCloud ParticleCloud::mixture(const ParticleCloud& a, const ParticleCloud& b, double share_a) {
  require_same_dim(a, b);
  if (!(share_a >= 0.0 && share_a <= 1.0)) throw ConfigError("mixture share must lie in [0,1]");
  std::vector<double> pos(a.positions_.begin(), a.positions_.end());
  pos.insert(pos.end(), b.positions_.begin(), b.positions_.end());
  std::vector<double> w;
  w.reserve(a.size() + b.size());
  for (double x : a.weights_) w.push_back(share_a * x);
  for (double x : b.weights_) w.push_back((1.0 - share_a) * x);
  return ParticleCloud(a.dim_, std::move(pos), std::move(w), a.time_);
}

LiftedPoint::LiftedPoint(std::vector<double> x_, ParticleCloud mu_) : x(std::move(x_)), mu(std::move(mu_)) {
  if (x.size() != static_cast<std::size_t>(mu.dim()))
    throw DimensionError("lifted point: x and mu dimensions differ");
}

namespace {

void check_alpha(std::span<const int> alpha, int dim) {
  if (alpha.size() != static_cast<std::size_t>(dim))
    throw DimensionError("multi-index length " + std::to_string(alpha.size()) + " does not match d=" +
                         std::to_string(dim));
  int order = 0;
  for (int a : alpha) {
    if (a < 0) throw ConfigError("multi-index entries must be nonnegative");
    order += a;
  }
  if (order > 8) throw ConfigError("moment order exceeds 8");
}

void fill_terms(std::span<const double> positions, std::span<const double> weights, int dim,
                std::span<const int> alpha, std::vector<double>& buf) {
  const std::size_t n = weights.size();
  buf.resize(n);
  std::copy(weights.begin(), weights.end(), buf.begin());
  for (int c = 0; c < dim; ++c) {
    const int a = alpha[static_cast<std::size_t>(c)];
    if (a == 0) continue;
    const double* x = positions.data() + c;
    for (std::size_t i = 0; i < n; ++i) {
      buf[i] *= int_power(x[i * static_cast<std::size_t>(dim)], a);
    }
  }
}

}  // namespace

double moment(std::span<const double> positions, std::span<const double> weights, int dim,
              std::span<const int> alpha) {
  check_alpha(alpha, dim);
  thread_local std::vector<double> buf;
  fill_terms(positions, weights, dim, alpha, buf);
  return exact_sum_destructive(buf);
}

std::vector<double> moments(std::span<const double> positions, std::span<const double> weights, int dim,
                            const std::vector<std::vector<int>>& alphas) {
  for (const auto& a : alphas) check_alpha(a, dim);
  std::vector<double> out(alphas.size(), 0.0);
  thread_local std::vector<double> buf;
  for (std::size_t j = 0; j < alphas.size(); ++j) {
    fill_terms(positions, weights, dim, alphas[j], buf);
    out[j] = exact_sum_destructive(buf);
  }
  return out;
}

double moment(const ParticleCloud& mu, std::span<const int> alpha) {
  return moment(mu.positions(), mu.weights(), mu.dim(), alpha);
}

double second_moment_norm(std::span<const double> positions, std::span<const double> weights, int dim) {
  ExactSum s;
  const std::size_t n = weights.size();
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < dim; ++c) {
      const double x = positions[i * dim + c];
      s.add(weights[i] * (x * x));
    }
  return std::sqrt(s.value());
}

double second_moment_norm(const ParticleCloud& mu) {
  return second_moment_norm(mu.positions(), mu.weights(), mu.dim());
}

namespace {

struct Sorted1d {
  std::vector<double> x;
  std::vector<double> cumulative;
};

Sorted1d sort_1d(std::span<const double> x, std::span<const double> w) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  Sorted1d out;
  out.x.reserve(idx.size());
  out.cumulative.reserve(idx.size());
  double c = 0.0;
  for (std::size_t i : idx) {
    out.x.push_back(x[i]);
    c += w[i];
    out.cumulative.push_back(c);
  }
  return out;
}

double cost_power(double diff, double p) {
  const double a = std::abs(diff);
  if (p == 2.0) return a * a;
  if (p == 1.0) return a;
  return std::pow(a, p);
}

// sum over the common refinement of both cumulative-weight partitions
double transport_cost_1d(const Sorted1d& u, const Sorted1d& v, double p) {
  std::size_t i = 0, j = 0;
  double prev = 0.0;
  ExactSum cost;
  while (i < u.x.size() && j < v.x.size()) {
    const double next = std::min(u.cumulative[i], v.cumulative[j]);
    const double mass = next - prev;
    if (mass > 0.0) cost.add(mass * cost_power(u.x[i] - v.x[j], p));
    prev = std::max(prev, next);
    const bool adv_i = u.cumulative[i] <= next;
    const bool adv_j = v.cumulative[j] <= next;
    if (adv_i) ++i;
    if (adv_j) ++j;
  }
  return cost.value();
}

double wasserstein_pow_1d(std::span<const double> x, std::span<const double> wx, std::span<const double> y,
                          std::span<const double> wy, double p) {
  return transport_cost_1d(sort_1d(x, wx), sort_1d(y, wy), p);
}

}  // namespace

double wasserstein_1d(const ParticleCloud& mu, const ParticleCloud& nu, double p) {
  if (mu.dim() != 1 || nu.dim() != 1) throw DimensionError("wasserstein_1d requires d = 1");
  if (!(p >= 1.0)) throw ConfigError("Wasserstein order must be >= 1");
  const double c = wasserstein_pow_1d(mu.positions(), mu.weights(), nu.positions(), nu.weights(), p);
  return p == 2.0 ? std::sqrt(c) : std::pow(c, 1.0 / p);
}

double wasserstein2_1d(const ParticleCloud& mu, const ParticleCloud& nu) { return wasserstein_1d(mu, nu, 2.0); }

double sliced_wasserstein(const ParticleCloud& mu, const ParticleCloud& nu, double p, int n_proj,
                          std::uint64_t seed) {
  require_same_dim(mu, nu);
  if (mu.dim() < 2) throw DimensionError("sliced Wasserstein is for d >= 2; use the exact 1-D distance");
  if (n_proj < 1) throw ConfigError("n_proj must be positive");
  if (!(p >= 1.0)) throw ConfigError("Wasserstein order must be >= 1");
  const int d = mu.dim();
  const CounterRng rng(seed, Stream::kProjection);
  std::vector<double> per_proj(static_cast<std::size_t>(n_proj));
#pragma omp parallel for schedule(static)
  for (int k = 0; k < n_proj; ++k) {
    std::vector<double> dir(static_cast<std::size_t>(d));
    // polar normals are never exactly zero
    double norm2 = 0.0;
    for (int c = 0; c < d; ++c) {
      const double z = rng.normals(static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(c / 4))[c % 4];
      dir[static_cast<std::size_t>(c)] = z;
      norm2 += z * z;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& c : dir) c *= inv;
    auto project = [&](const ParticleCloud& c) {
      std::vector<double> out(c.size());
      for (std::size_t i = 0; i < c.size(); ++i) {
        double s = 0.0;
        for (int j = 0; j < d; ++j) s += dir[j] * c.positions()[i * d + j];
        out[i] = s;
      }
      return out;
    };
    const auto px = project(mu);
    const auto py = project(nu);
    per_proj[static_cast<std::size_t>(k)] = wasserstein_pow_1d(px, mu.weights(), py, nu.weights(), p);
  }
  const double mean = exact_sum(per_proj) / n_proj;
  return p == 2.0 ? std::sqrt(mean) : std::pow(mean, 1.0 / p);
}

double sliced_wasserstein2(const ParticleCloud& mu, const ParticleCloud& nu, int n_proj, std::uint64_t seed) {
  return sliced_wasserstein(mu, nu, 2.0, n_proj, seed);
}

DistanceValue w2_distance(const ParticleCloud& mu, const ParticleCloud& nu, int n_proj, std::uint64_t seed) {
  require_same_dim(mu, nu);
  if (mu.dim() == 1) return {wasserstein2_1d(mu, nu), true};
  return {sliced_wasserstein2(mu, nu, n_proj, seed), false};
}

DistanceValue levy_prohorov_upper(const ParticleCloud& mu, const ParticleCloud& nu, int p, int n_proj,
                                  std::uint64_t seed) {
  require_same_dim(mu, nu);
  if (p != 1 && p != 2) throw ConfigError("levy_prohorov_upper supports p in {1, 2}");
  const double wp = mu.dim() == 1 ? wasserstein_1d(mu, nu, p) : sliced_wasserstein(mu, nu, p, n_proj, seed);
  const double exponent = static_cast<double>(p) / (p + 1.0);
  return {std::pow(wp, exponent), mu.dim() == 1};
}

double omega_small(const ParticleCloud& mu, const ParticleCloud& nu) {
  require_same_dim(mu, nu);
  const int d = mu.dim();
  // distinct support points with their masses under both measures
  std::vector<std::vector<double>> points;
  std::vector<double> mass_mu, mass_nu;
  auto add = [&](std::span<const double> x, double w, bool is_mu) {
    for (std::size_t k = 0; k < points.size(); ++k) {
      if (std::equal(points[k].begin(), points[k].end(), x.begin())) {
        (is_mu ? mass_mu : mass_nu)[k] += w;
        return;
      }
    }
    if (points.size() == kOmegaMaxSupport)
      throw ConfigError("omega_small: combined support exceeds " + std::to_string(kOmegaMaxSupport) + " points");
    points.emplace_back(x.begin(), x.end());
    mass_mu.push_back(is_mu ? w : 0.0);
    mass_nu.push_back(is_mu ? 0.0 : w);
  };
  for (std::size_t i = 0; i < mu.size(); ++i)
    if (mu.weight(i) > 0.0) add(mu.position(i), mu.weight(i), true);
  for (std::size_t i = 0; i < nu.size(); ++i)
    if (nu.weight(i) > 0.0) add(nu.position(i), nu.weight(i), false);

  const std::size_t n = points.size();
  std::vector<double> dist(n * n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      double s = 0.0;
      for (int c = 0; c < d; ++c) {
        const double diff = points[a][c] - points[b][c];
        s += diff * diff;
      }
      dist[a * n + b] = std::sqrt(s);
    }

  const std::size_t subsets = std::size_t{1} << n;
  std::vector<double> set_mu(subsets), set_nu(subsets), set_dist(subsets * n);
  for (std::size_t mask = 1; mask < subsets; ++mask) {
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t z = 0; z < n; ++z) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < n; ++a)
        if (mask >> a & 1u) best = std::min(best, dist[z * n + a]);
      set_dist[mask * n + z] = best;
      if (mask >> z & 1u) {
        m1 += mass_mu[z];
        m2 += mass_nu[z];
      }
    }
    set_mu[mask] = m1;
    set_nu[mask] = m2;
  }

  // On delta in (D_k, D_{k+1}] (consecutive distinct pairwise distances) the
  // inflations A^delta are fixed, so the constraint reduces to delta > g_k.
  std::vector<double> levels(dist.begin(), dist.end());
  levels.push_back(0.0);
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  double best = 1.0;
  for (std::size_t k = 0; k < levels.size() && levels[k] < best; ++k) {
    const double lo = levels[k];
    const double hi = k + 1 < levels.size() ? levels[k + 1] : std::numeric_limits<double>::infinity();
    double g = 0.0;
    for (std::size_t mask = 1; mask < subsets; ++mask) {
      double mu_inflated = 0.0, nu_inflated = 0.0;
      for (std::size_t z = 0; z < n; ++z)
        if (set_dist[mask * n + z] <= lo) {
          mu_inflated += mass_mu[z];
          nu_inflated += mass_nu[z];
        }
      g = std::max({g, set_mu[mask] - nu_inflated, set_nu[mask] - mu_inflated});
    }
    const double candidate = std::max(lo, g);
    if (candidate < hi) best = std::min(best, candidate);
  }
  return best;
}

double tail_mass(const ParticleCloud& mu, double radius) {
  if (!(radius > 0.0)) throw ConfigError("tail radius must be positive");
  const int d = mu.dim();
  const double r2 = radius * radius;
  ExactSum s;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    double n2 = 0.0;
    for (int c = 0; c < d; ++c) n2 += mu.positions()[i * d + c] * mu.positions()[i * d + c];
    if (n2 > r2) s.add(mu.weight(i));
  }
  return s.value();
}

double tail_second_moment(const ParticleCloud& mu, double radius) {
  const int d = mu.dim();
  const double r2 = radius * radius;
  ExactSum s;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    double n2 = 0.0;
    for (int c = 0; c < d; ++c) n2 += mu.positions()[i * d + c] * mu.positions()[i * d + c];
    if (n2 > r2) s.add(mu.weight(i) * n2);
  }
  return s.value();
}

bool lifted_in_tail(const LiftedPoint& lp, double radius) {
  if (!(radius > 0.0)) throw ConfigError("tail radius must be positive");
  double n2 = 0.0;
  for (double c : lp.x) n2 += c * c;
  return std::max(std::sqrt(n2), second_moment_norm(lp.mu)) > radius;
}

}  // namespace mvlab
