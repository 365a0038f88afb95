#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvlab/expr.hpp"
#include "mvlab/measure.hpp"
#include "mvlab/model.hpp"
#include "mvlab/poly.hpp"
#include "mvlab/simulate.hpp"

namespace mvlab {

/// V(t,x,mu) = v0(t,x) + int v1(t,y) mu(dy), with v0 and v1 free of
/// observables. Derivatives are compiled once.
class LyapunovSpec {
 public:
  LyapunovSpec(Expr v0, Expr v1, double period, int dim);
  /// Strings in the model grammar; x* and y* both address coordinates.
  static LyapunovSpec parse(const std::string& v0, const std::string& v1, double period, int dim);

  int dim() const noexcept { return dim_; }
  double period() const noexcept { return period_; }
  const Expr& v0() const noexcept { return v0_; }
  const Expr& v1() const noexcept { return v1_; }

  /// value, d/dt, gradient (d), Hessian (d x d row-major) of v0 or v1.
  struct Parts {
    Poly value, dt;
    std::vector<Poly> grad;
    std::vector<Poly> hess;
  };
  const Parts& part0() const noexcept { return p0_; }
  const Parts& part1() const noexcept { return p1_; }

  double v0_value(double t, std::span<const double> x) const;
  double v1_value(double t, std::span<const double> y) const;
  void v1_gradient(double t, std::span<const double> y, std::span<double> out) const;
  void v1_hessian(double t, std::span<const double> y, std::span<double> out) const;

  double value(double t, std::span<const double> x, const ParticleCloud& mu) const;

  /// min over a grid of (t, x) of v0 and v1; negative means the
  /// nonnegativity surrogate fails.
  double min_on_grid(double half_width = 5.0, int points_per_axis = 11, int time_points = 8) const;

 private:
  Expr v0_, v1_;
  double period_;
  int dim_;
  Parts p0_, p1_;
};

/// LV at fixed (t, mu), reusable across many x.
class GeneratorFrame {
 public:
  GeneratorFrame(const LyapunovSpec& ls, const ModelSpec& ms, double t, const ParticleCloud& mu);

  /// LV(t, x, mu).
  double operator()(std::span<const double> x) const;
  /// Measure part: int [d_t v1 + b.grad v1 + 1/2 tr(sigma sigma^T Hess v1)] dmu.
  double measure_part() const noexcept { return measure_part_; }
  /// Point part at x: d_t v0 + b-bar.grad v0 + 1/2 tr(sigma-bar sigma-bar^T Hess v0).
  double point_part(std::span<const double> x) const;
  /// Integrand of the measure part at a single y.
  double measure_integrand(std::span<const double> y) const;

 private:
  int d_, m_;
  CoefficientFrame main_, bar_;
  std::vector<BoundPoly> dt0_, g0_, h0_, dt1_, g1_, h1_;
  double measure_part_ = 0.0;
};

double eval_LV(const LyapunovSpec& ls, const ModelSpec& ms, double t, std::span<const double> x,
               const ParticleCloud& mu);

struct LionsCheck {
  double max_gradient_error = 0.0;
  double max_hessian_error = 0.0;
  double max_error = 0.0;
};

/// Compares the closed-form Lions derivative grad v1 against finite
/// differences of the flat derivative, and Hess v1 against central
/// differences of grad v1, at every grid point. `y_grid` is row-major.
LionsCheck check_lions_closed_form(const LyapunovSpec& ls, double t, std::span<const double> y_grid,
                                   double eps = 1e-2, double h = 1e-4);

struct ScanParams {
  std::size_t samples_per_radius = 2000;
  double shell_width = 0.05;        // shell is [R, (1+w) R]
  std::size_t cloud_points = 16;    // particles per sampled measure
  int max_components = 4;           // Gaussian-location mixture size
  double component_spread = 0.3;
};

struct RadialScanReport {
  std::vector<double> radii;
  std::vector<double> a_hat;  // max LV on the shell
  std::vector<double> v_hat;  // min V on the shell
  ScanParams params;
  std::uint64_t seed = 0;
};

RadialScanReport radial_scan(const LyapunovSpec& ls, const ModelSpec& ms, const std::vector<double>& radii,
                             const ScanParams& params, std::uint64_t seed);

/// max(0, max_R a_hat) inflated by `margin` (relative) plus `floor` (absolute).
double lambda_from_scan(const RadialScanReport& report, double margin = 0.25, double floor = 0.1);

/// lambda_from_scan over `grid` equispaced radii in (0, r_max]; the
/// positive part of LV usually sits near the origin.
double scan_lambda(const LyapunovSpec& ls, const ModelSpec& ms, double r_max, const ScanParams& params,
                   std::uint64_t seed, std::size_t grid = 40);

/// Probability that the lifted state (X, mu-hat) lies in U_R^c under the
/// empirical law: 1 when |mu-hat|_2 > R, else the tail mass of mu-hat.
double lifted_tail_probability(const ParticleCloud& mu, double radius);

struct ChebyshevRow {
  double time;
  double empirical;
  double standard_error;
  double bound;
  bool holds;
};

struct ChebyshevReport {
  double lambda = 0.0;
  double visited_sup_lv = 0.0;
  double radius = 0.0;
  double v_hat = 0.0;
  double initial_ev = 0.0;
  std::vector<ChebyshevRow> rows;
  bool holds = true;
};

/// Checks P(U_R^c at t) <= (E V(s) + lambda (t - s)) / V_R + 3 SE at every
/// snapshot, s the first snapshot time. Throws ConfigError when lambda is
/// below the sup of LV over the visited (x_i, mu-hat) states. `v_hat`
/// defaults to the min of V from a radial scan at R.
ChebyshevReport chebyshev_tail_bound(const LyapunovSpec& ls, const ModelSpec& ms, const Trajectory& traj,
                                     double lambda, double radius, std::optional<double> v_hat = std::nullopt);

struct TailCriteriaRow {
  double radius;
  double cesaro_period_average;  // (a)
  double time_average;           // (b)
  double alpha;                  // (c), conditional tail from inside U_{R/2}
  std::size_t alpha_pairs;       // pairs that contributed to (c)
};

struct TailCriteriaReport {
  std::size_t periods = 0;
  std::vector<TailCriteriaRow> rows;
};

/// Statistics behind the Cesaro tail criteria, from the first snapshot time
/// s0 over n = floor(span / T) whole periods.
TailCriteriaReport tail_criteria(const Trajectory& traj, const std::vector<double>& radii, double period);

struct ItoCheckReport {
  std::uint64_t steps = 0;
  double sum_increment = 0.0;  // E V(t_end) - E V(t_0)
  double sum_generator = 0.0;  // sum over steps of mean LV * dt
  double discrepancy = 0.0;
  double standard_error = 0.0;
  double allowance = 0.0;      // 3 SE + 10 dt^2 per step
  bool holds = false;
};

/// Streams an ensemble over [t0, t1] and compares the increment of
/// E V(t, X_t, mu-hat_t) with sum mean(LV) dt.
ItoCheckReport ito_increment_check(const LyapunovSpec& ls, const ModelSpec& ms, const ParticleCloud& init,
                                   const SimConfig& cfg);

}  // namespace mvlab
