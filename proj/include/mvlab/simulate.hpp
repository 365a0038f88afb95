#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "mvlab/error.hpp"
#include "mvlab/measure.hpp"
#include "mvlab/model.hpp"

namespace mvlab {

struct SimConfig {
  std::size_t N = 1000;
  double dt = 1e-3;
  double t0 = 0.0;
  double t1 = 1.0;
  std::uint64_t seed = 1;
  std::size_t record_stride = 1;
  double blowup_radius = 1e6;

  /// Throws ConfigError naming the offending field.
  void validate(double period) const;
  /// Number of steps: the smallest n with (t1-t0)/n <= dt.
  std::uint64_t step_count() const;
  double effective_dt() const;
};

struct Trajectory {
  std::vector<ParticleCloud> snapshots;
  /// X-bar clouds paired with `snapshots` (coupled runs only).
  std::vector<ParticleCloud> coupled;
  SimConfig config;
  double dt_effective = 0.0;
  std::uint64_t n_steps = 0;
  std::shared_ptr<const ModelSpec> model;

  bool has_coupled() const noexcept { return !coupled.empty(); }
  std::vector<double> times() const;
};

class BlowUpError : public Error {
 public:
  BlowUpError(double time, std::size_t particle, const std::string& detail);

  double time() const noexcept { return time_; }
  std::size_t particle() const noexcept { return particle_; }
  /// Snapshots recorded before the failure, when raised by a driver.
  const std::shared_ptr<const Trajectory>& partial() const noexcept { return partial_; }
  BlowUpError with_partial(Trajectory traj) const;

 private:
  double time_;
  std::size_t particle_;
  std::shared_ptr<const Trajectory> partial_;
};

/// Fills `out` (N x m, row-major) with the standard normals of a step.
using NoiseSource = std::function<void(std::uint64_t step, std::span<double> out)>;

/// Philox-backed source: entry L of step k depends only on (seed, k, L).
NoiseSource counter_noise(std::uint64_t seed);

/// One Euler-Maruyama step with coefficients frozen on `cloud`.
/// `noise` holds N x m standard normals.
ParticleCloud em_step(const ModelSpec& ms, const ParticleCloud& cloud, double t, double dt,
                      std::span<const double> noise,
                      double blowup_radius = std::numeric_limits<double>::infinity());

/// Particle ensemble (optionally paired with an X-bar ensemble) advanced in
/// place on the grid t0 + k dt.
class EnsembleStepper {
 public:
  EnsembleStepper(ModelSpec ms, const ParticleCloud& init, double t0, double dt, NoiseSource noise,
                  double blowup_radius, std::optional<std::vector<double>> coupled_init = std::nullopt);

  /// Throws BlowUpError; the state is left at the last good step.
  void step();

  double time() const noexcept { return t0_ + static_cast<double>(k_) * dt_; }
  std::uint64_t steps_taken() const noexcept { return k_; }
  double dt() const noexcept { return dt_; }
  std::size_t size() const noexcept { return weights_.size(); }
  bool coupled() const noexcept { return has_bar_; }
  const ModelSpec& model() const noexcept { return ms_; }

  std::span<const double> positions() const noexcept { return x_; }
  std::span<const double> coupled_positions() const noexcept { return bar_; }
  std::span<const double> weights() const noexcept { return weights_; }
  /// Normals used by the most recent step.
  std::span<const double> last_noise() const noexcept { return xi_; }

  ParticleCloud cloud() const;
  ParticleCloud coupled_cloud() const;

 private:
  ModelSpec ms_;
  int d_;
  int m_;
  double t0_;
  double dt_;
  std::uint64_t k_ = 0;
  NoiseSource noise_;
  double blowup_;
  std::vector<double> x_, x_next_, bar_, bar_next_, weights_, xi_;
  bool has_bar_ = false;
};

/// N i.i.d. draws from `mu` (uniform weights), reproducible from `seed`.
ParticleCloud resample(const ParticleCloud& mu, std::size_t n, std::uint64_t seed);

/// Law flow from `init`. `init` is used verbatim when it has N particles and
/// resampled to N draws otherwise.
Trajectory simulate_flow(const ModelSpec& ms, const ParticleCloud& init, const SimConfig& cfg,
                         const NoiseSource& noise = {});

/// Coupled system: X from N draws of mu0, X-bar from the point x0; pair i
/// shares its noise; both coefficient sets read the X-ensemble's law.
Trajectory simulate_coupled(const ModelSpec& ms, std::span<const double> x0, const ParticleCloud& mu0,
                            const SimConfig& cfg, const NoiseSource& noise = {});
/// Same with explicit N-particle initial ensembles (no resampling).
Trajectory simulate_coupled(const ModelSpec& ms, const ParticleCloud& x_init, const ParticleCloud& xbar_init,
                            const SimConfig& cfg, const NoiseSource& noise = {});

/// W2 between the flow s->t run in one pass and the flow s->u->t run in two
/// legs with independent seeds. The step is snapped so both legs tile the
/// same grid. Exact in 1-D, sliced otherwise.
DistanceValue flow_semigroup_gap(const ModelSpec& ms, const ParticleCloud& mu0, double s, double u, double t,
                                 const SimConfig& cfg);

}  // namespace mvlab
