#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mvlab/expr.hpp"
#include "mvlab/measure.hpp"
#include "mvlab/model.hpp"
#include "mvlab/simulate.hpp"

namespace mvlab {

/// Clouds at the phases k T / m, k = 0..m-1, of a candidate periodic law.
struct PhaseMeasureSet {
  double period = 0.0;
  double s0 = 0.0;
  std::vector<double> phases;
  std::vector<ParticleCloud> clouds;
  std::size_t periods_averaged = 0;
  std::uint64_t seed = 0;
  std::size_t N = 0;
  double dt = 0.0;
};

/// Pools the snapshots at s0 + phase + kT, k = 1..n, with weights w/n.
PhaseMeasureSet kb_average(const Trajectory& traj, double s0, double period, std::size_t n, std::size_t m);

struct CertifyConfig {
  // N, dt, t0, seed and blowup_radius are used; t1/record_stride are derived
  SimConfig sim = [] {
    SimConfig s;
    s.N = 5000;
    return s;
  }();
  std::size_t burn_in = 20;
  std::size_t trailing = 5;
  std::size_t phases = 8;
  double tol = 0.05;
  std::vector<double> tail_radii{2.0, 4.0, 8.0};
  int n_proj = 64;  // sliced W2 directions when d >= 2

  void validate(double period) const;
  /// Steps per period: the smallest multiple of `phases` with T/steps <= dt.
  std::uint64_t steps_per_period(double period) const;
};

struct PeriodicCertificate {
  /// distances[j][k] = W2(cloud at phase j of period B+k, of period B+k+1).
  std::vector<std::vector<double>> distances;
  double max_distance = 0.0;
  double tol = 0.0;
  bool pass = false;
  bool exact_distances = true;
  std::vector<double> tail_radii;
  std::vector<double> tail_profile;  // max over phases of the pooled tail mass
  CertifyConfig config;
  double dt_effective = 0.0;
  std::string model_label;
};

struct Certification {
  PeriodicCertificate certificate;
  PhaseMeasureSet phase_set;  // pooled over periods B..B+trailing
};

/// Simulates burn-in + trailing periods and compares consecutive-period
/// clouds phase by phase. Blow-up propagates as BlowUpError.
Certification certify_periodic(const ModelSpec& ms, const ParticleCloud& init, const CertifyConfig& cfg);

/// Same analysis on an existing trajectory whose snapshots sit on the phase
/// grid (t0 + k T/m). Uses the first burn_in + trailing periods.
Certification certify_trajectory(const Trajectory& traj, const CertifyConfig& cfg);

struct PeriodMapLog {
  std::vector<double> distances;  // W2(iterate k+1, iterate k)
  std::size_t iterations = 0;
  bool converged = false;
  std::size_t best_iteration = 0;  // smallest logged distance
  bool returned_best = false;      // true when not converged
};

struct PeriodMapResult {
  PhaseMeasureSet phase_set;
  PeriodMapLog log;
};

/// Iterates mu -> law after one period until W2 between successive iterates
/// is at most `tol`; returns the last one-period phase set (or the best one,
/// flagged, after max_iters).
PeriodMapResult period_map_iterate(const ModelSpec& ms, const ParticleCloud& init, const CertifyConfig& cfg,
                                   std::size_t max_iters, double tol);

struct CesaroReport {
  std::vector<std::size_t> ladder;
  std::vector<double> averages;
  std::vector<double> increments;  // |A_{n_{j+1}} - A_{n_j}|
  bool non_monotone = false;       // increments failed to shrink somewhere
  double batch_standard_error = 0.0;  // from per-period averages of the longest run
  double sup_abs_integrand = 0.0;
};

/// (1/(nT)) int_{t0}^{t0+nT} <f(s, ., mu_s), mu_s> ds by the trapezoid rule
/// on the phase grid, for each n in `ladder`.
CesaroReport cesaro_functional_convergence(const ModelSpec& ms, const ParticleCloud& init, const Expr& f,
                                           const CertifyConfig& cfg, const std::vector<std::size_t>& ladder);

struct SweepMember {
  std::string label;
  bool certified = false;
  bool blew_up = false;
  std::string failure;
  double max_distance = 0.0;
  std::vector<double> tail_profile;
  double distance_to_last = 0.0;  // max over phases
};

struct SweepReport {
  std::vector<double> tail_radii;
  std::vector<double> sup_tail;  // sup over members
  std::vector<SweepMember> members;
};

/// Certifies each model (member k uses seed derive_seed(seed, k)) and
/// reports the uniform tail profile and distances to the last member.
SweepReport parameter_sweep(const std::vector<ModelSpec>& models, const CertifyConfig& cfg, const ParticleCloud& init);

}  // namespace mvlab
