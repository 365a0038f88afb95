#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace mvlab {

/// Weighted particle representation of a probability measure on R^d at a
/// model time. Positions are stored row-major (particle i occupies
/// positions[i*d .. i*d+d)).
class ParticleCloud {
 public:
  ParticleCloud(int dim, std::vector<double> positions, std::vector<double> weights, double time = 0.0);

  /// Equal weights 1/N.
  static ParticleCloud uniform(int dim, std::vector<double> positions, double time = 0.0);
  static ParticleCloud point_mass(std::span<const double> x, double time = 0.0);

  int dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return weights_.size(); }
  double time() const noexcept { return time_; }

  std::span<const double> positions() const noexcept { return positions_; }
  std::span<const double> weights() const noexcept { return weights_; }
  std::span<const double> position(std::size_t i) const noexcept {
    return {positions_.data() + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }
  double weight(std::size_t i) const noexcept { return weights_[i]; }

  ParticleCloud with_time(double t) const;

  /// Concatenation with weights scaled by `share` and `1-share`.
  static ParticleCloud mixture(const ParticleCloud& a, const ParticleCloud& b, double share_a);

 private:
  int dim_;
  std::vector<double> positions_;
  std::vector<double> weights_;
  double time_;
};

/// A point of the lifted state space R^d x P(R^d).
struct LiftedPoint {
  std::vector<double> x;
  ParticleCloud mu;

  LiftedPoint(std::vector<double> x_, ParticleCloud mu_);
};

/// sum_i w_i prod_c x_{i,c}^alpha_c, correctly rounded. |alpha| <= 8.
double moment(const ParticleCloud& mu, std::span<const int> alpha);
double moment(std::span<const double> positions, std::span<const double> weights, int dim,
              std::span<const int> alpha);

/// Several moments in one pass; same values as moment() for each alpha.
std::vector<double> moments(std::span<const double> positions, std::span<const double> weights, int dim,
                            const std::vector<std::vector<int>>& alphas);

/// |mu|_2 = (int |x|^2 mu(dx))^{1/2}.
double second_moment_norm(const ParticleCloud& mu);
double second_moment_norm(std::span<const double> positions, std::span<const double> weights, int dim);

/// Exact 1-D W_p (p >= 1) through the monotone (quantile) coupling.
double wasserstein_1d(const ParticleCloud& mu, const ParticleCloud& nu, double p);
double wasserstein2_1d(const ParticleCloud& mu, const ParticleCloud& nu);

/// (mean over random directions u of W_p(<u,mu>, <u,nu>)^p)^{1/p}; d >= 2.
double sliced_wasserstein(const ParticleCloud& mu, const ParticleCloud& nu, double p, int n_proj,
                          std::uint64_t seed);
double sliced_wasserstein2(const ParticleCloud& mu, const ParticleCloud& nu, int n_proj, std::uint64_t seed);

/// W2 for any dimension: exact when d == 1, sliced otherwise.
struct DistanceValue {
  double value;
  bool exact;
};
DistanceValue w2_distance(const ParticleCloud& mu, const ParticleCloud& nu, int n_proj = 64,
                          std::uint64_t seed = 0x5eed);

/// W_p^{p/(p+1)}, an upper bound on the Levy-Prohorov distance.
/// `exact` is false when the sliced surrogate had to be used (d >= 2).
DistanceValue levy_prohorov_upper(const ParticleCloud& mu, const ParticleCloud& nu, int p, int n_proj = 64,
                                  std::uint64_t seed = 0x5eed);

/// Levy-Prohorov distance from its definition, with all unions of support
/// points as candidate closed sets, solved exactly between consecutive
/// pairwise distances. Combined distinct
/// support must not exceed kOmegaMaxSupport points.
inline constexpr std::size_t kOmegaMaxSupport = 12;
double omega_small(const ParticleCloud& mu, const ParticleCloud& nu);

/// Mass of particles with |x| > R.
double tail_mass(const ParticleCloud& mu, double radius);
/// |x| v |mu|_2 > R.
bool lifted_in_tail(const LiftedPoint& lp, double radius);

/// Mass carried outside the radius-R ball weighted by |x|^2: int_{|x|>R} |x|^2 mu(dx).
double tail_second_moment(const ParticleCloud& mu, double radius);

}  // namespace mvlab
