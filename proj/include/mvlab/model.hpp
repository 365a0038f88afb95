#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mvlab/expr.hpp"
#include "mvlab/poly.hpp"

namespace mvlab {

class ParticleCloud;

/// Main coefficients (b, sigma) or the auxiliary pair (b-bar, sigma-bar).
enum class Which { kMain, kCoupled };

/// Coefficients with time and measure frozen; evaluation applies the
/// truncation clip to its point argument.
class CoefficientFrame {
 public:
  int dim() const noexcept { return dim_; }
  int noise_dim() const noexcept { return m_; }

  void drift(const double* x, double* out) const noexcept;
  /// Row-major d x m.
  void diffusion(const double* x, double* out) const noexcept;

  /// out = x + b dt + sigma sqrt(dt) xi. `out` may alias `x`.
  void advance(const double* x, const double* xi, double dt, double sqrt_dt, double* out) const noexcept;

  /// advance() over n particles (xi holds m normals per particle). Returns
  /// the first index whose new position is non-finite or has norm above
  /// `blowup`, or n. Same values as per-particle advance().
  std::size_t advance_ensemble(const double* in, double* out, const double* xi, std::size_t n, double dt,
                               double blowup) const noexcept;

 private:
  friend class ModelSpec;
  void clip(const double* x, double* buf) const noexcept;

  int dim_ = 1;
  int m_ = 1;
  double radius_ = 0.0;
  bool truncate_ = false;
  std::vector<BoundPoly> b_;
  std::vector<BoundPoly> s_;
};

/// Time-periodic McKean-Vlasov coefficients. Immutable; copies share state.
class ModelSpec {
 public:
  ModelSpec(int d, int m, double period, std::vector<Expr> drift, std::vector<Expr> diffusion,
            std::optional<std::vector<Expr>> coupled_drift = std::nullopt,
            std::optional<std::vector<Expr>> coupled_diffusion = std::nullopt,
            std::optional<double> trunc_radius = std::nullopt);

  /// Same as above from expression strings; diffusion rows are d lists of m.
  static ModelSpec parse(int d, int m, double period, const std::vector<std::string>& drift,
                         const std::vector<std::vector<std::string>>& diffusion,
                         const std::optional<std::vector<std::string>>& coupled_drift = std::nullopt,
                         const std::optional<std::vector<std::vector<std::string>>>& coupled_diffusion = std::nullopt,
                         std::optional<double> trunc_radius = std::nullopt);

  int dim() const noexcept;
  int noise_dim() const noexcept;
  double period() const noexcept;
  std::optional<double> trunc_radius() const noexcept;
  bool has_coupled_drift() const noexcept;
  bool has_coupled_diffusion() const noexcept;

  const std::vector<Expr>& drift(Which which = Which::kMain) const noexcept;
  /// Row-major d x m.
  const std::vector<Expr>& diffusion(Which which = Which::kMain) const noexcept;
  const Poly& drift_poly(Which which, int i) const;
  const Poly& diffusion_poly(Which which, int i, int j) const;

  /// Every observable multi-index used by the given coefficient pair.
  const std::vector<std::vector<int>>& observables(Which which) const noexcept;

  ModelSpec with_trunc_radius(std::optional<double> radius) const;
  /// Replaces (or clears, with nullopt) the auxiliary coefficients.
  ModelSpec with_coupled(std::optional<std::vector<Expr>> drift, std::optional<std::vector<Expr>> diffusion) const;

  /// Binds time and measure. With truncation, the measure is pushed forward
  /// through the clip before its moments are taken.
  CoefficientFrame freeze(Which which, double t, std::span<const double> positions,
                          std::span<const double> weights) const;
  CoefficientFrame freeze(Which which, double t, const ParticleCloud& mu) const;

  /// Free-form label carried into exports (builtin name, file path, ...).
  const std::string& label() const noexcept;
  ModelSpec with_label(std::string label) const;

 private:
  struct Impl;
  explicit ModelSpec(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;
};

/// Projection onto the closed ball of radius r.
void clip_to_ball(std::span<double> x, double radius) noexcept;

std::vector<double> eval_drift(const ModelSpec& ms, Which which, double t, std::span<const double> x,
                               const ParticleCloud& mu);
/// Row-major d x m.
std::vector<double> eval_diffusion(const ModelSpec& ms, Which which, double t, std::span<const double> x,
                                   const ParticleCloud& mu);

using ParamMap = std::map<std::string, double>;

/// Built-in models:
///   ex51_ou      dX = (-a X + b M[1] + c sin t) dt + sigma dW, T = 2pi
///                defaults a=1, b=0.25, c=1, sigma=1
///   ex52_quartic dX = (-4X^3 + X sin(t)/8 + M[1]) dt + sqrt(2) X dW, T = 2pi
///   ex53_forced  ex51_ou (default c=0) plus f = f0 cos t + f1 M[1] sin t,
///                defaults f0=0.5, f1=0.1
/// Unknown parameter names are rejected.
ModelSpec builtin_example(std::string_view name, const ParamMap& params = {});
std::vector<std::string> builtin_names();
ParamMap builtin_defaults(std::string_view name);

}  // namespace mvlab
