#include "mvlab/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mvlab/exact_sum.hpp"
#include "mvlab/rng.hpp"

namespace mvlab {

namespace {

constexpr std::uint64_t kTagNoise = 0x4e4f495345ull;
constexpr std::uint64_t kTagResample = 0x52455341ull;

std::uint64_t snapped_steps(double span, double dt) {
  const double ratio = span / dt;
  auto n = static_cast<std::uint64_t>(std::ceil(ratio - 1e-9 * std::max(1.0, ratio)));
  return std::max<std::uint64_t>(n, 1);
}

std::string describe_blowup(double t, std::size_t i, double radius) {
  return "particle " + std::to_string(i) + " left the ball of radius " + std::to_string(radius) +
         " (or became non-finite) in the step starting at t=" + std::to_string(t);
}

}  // namespace

void SimConfig::validate(double period) const {
  if (N < 1) throw ConfigError("N must be at least 1");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be positive");
  if (dt > period / 20.0 * (1.0 + 1e-12)) throw ConfigError("dt must not exceed T/20");
  if (!std::isfinite(t0) || !std::isfinite(t1) || !(t1 > t0)) throw ConfigError("t1 must exceed t0");
  if (record_stride < 1) throw ConfigError("record_stride must be at least 1");
  if (!(blowup_radius > 0.0)) throw ConfigError("blowup_radius must be positive");
}

std::uint64_t SimConfig::step_count() const { return snapped_steps(t1 - t0, dt); }

double SimConfig::effective_dt() const { return (t1 - t0) / static_cast<double>(step_count()); }

std::vector<double> Trajectory::times() const {
  std::vector<double> out;
  out.reserve(snapshots.size());
  for (const auto& s : snapshots) out.push_back(s.time());
  return out;
}

BlowUpError::BlowUpError(double time, std::size_t particle, const std::string& detail)
    : Error("blow-up: " + detail), time_(time), particle_(particle) {}

BlowUpError BlowUpError::with_partial(Trajectory traj) const {
  BlowUpError e = *this;
  e.partial_ = std::make_shared<const Trajectory>(std::move(traj));
  return e;
}

NoiseSource counter_noise(std::uint64_t seed) {
  const CounterRng rng(derive_seed(seed, kTagNoise), Stream::kEulerNoise);
  return [rng](std::uint64_t step, std::span<double> out) { rng.fill_normals(step, out); };
}

ParticleCloud em_step(const ModelSpec& ms, const ParticleCloud& cloud, double t, double dt,
                      std::span<const double> noise, double blowup_radius) {
  if (cloud.dim() != ms.dim()) throw DimensionError("cloud dimension does not match the model");
  const std::size_t n = cloud.size();
  const int d = ms.dim();
  const int m = ms.noise_dim();
  if (noise.size() != n * static_cast<std::size_t>(m))
    throw DimensionError("noise must hold N x m = " + std::to_string(n * m) + " entries");
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  const CoefficientFrame f = ms.freeze(Which::kMain, t, cloud);
  std::vector<double> out(n * static_cast<std::size_t>(d));
  const std::size_t bad = f.advance_ensemble(cloud.positions().data(), out.data(), noise.data(), n, dt, blowup_radius);
  if (bad < n) throw BlowUpError(t, bad, describe_blowup(t, bad, blowup_radius));
  return ParticleCloud(d, std::move(out), std::vector<double>(cloud.weights().begin(), cloud.weights().end()), t + dt);
}

EnsembleStepper::EnsembleStepper(ModelSpec ms, const ParticleCloud& init, double t0, double dt, NoiseSource noise,
                                 double blowup_radius, std::optional<std::vector<double>> coupled_init)
    : ms_(std::move(ms)),
      d_(ms_.dim()),
      m_(ms_.noise_dim()),
      t0_(t0),
      dt_(dt),
      noise_(std::move(noise)),
      blowup_(blowup_radius),
      x_(init.positions().begin(), init.positions().end()),
      weights_(init.weights().begin(), init.weights().end()) {
  if (init.dim() != d_) throw DimensionError("initial cloud dimension does not match the model");
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (!noise_) throw ConfigError("noise source is empty");
  x_next_.resize(x_.size());
  xi_.resize(weights_.size() * static_cast<std::size_t>(m_));
  if (coupled_init) {
    if (coupled_init->size() != x_.size()) throw DimensionError("coupled initial ensemble must match N x d");
    bar_ = std::move(*coupled_init);
    bar_next_.resize(bar_.size());
    has_bar_ = true;
  }
}

void EnsembleStepper::step() {
  const double t = time();
  const std::size_t n = weights_.size();
  noise_(k_, xi_);
  const CoefficientFrame f = ms_.freeze(Which::kMain, t, x_, weights_);
  std::size_t bad = f.advance_ensemble(x_.data(), x_next_.data(), xi_.data(), n, dt_, blowup_);
  if (bad < n) throw BlowUpError(t, bad, describe_blowup(t, bad, blowup_));
  if (has_bar_) {
    const CoefficientFrame g = ms_.freeze(Which::kCoupled, t, x_, weights_);
    bad = g.advance_ensemble(bar_.data(), bar_next_.data(), xi_.data(), n, dt_, blowup_);
    if (bad < n) throw BlowUpError(t, bad, "coupled " + describe_blowup(t, bad, blowup_));
    bar_.swap(bar_next_);
  }
  x_.swap(x_next_);
  ++k_;
}

ParticleCloud EnsembleStepper::cloud() const { return ParticleCloud(d_, x_, weights_, time()); }

ParticleCloud EnsembleStepper::coupled_cloud() const {
  if (!has_bar_) throw ConfigError("stepper has no coupled ensemble");
  return ParticleCloud(d_, bar_, weights_, time());
}

ParticleCloud resample(const ParticleCloud& mu, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("resample size must be positive");
  const int d = mu.dim();
  std::vector<double> cdf(mu.size());
  ExactSum acc;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    acc.add(mu.weight(i));
    cdf[i] = acc.value();
  }
  const CounterRng rng(derive_seed(seed, kTagResample), Stream::kResample);
  std::vector<double> pos(n * static_cast<std::size_t>(d));
  for (std::size_t j = 0; j < n; ++j) {
    const double u = rng.uniforms(0, j)[0] * cdf.back();
    std::size_t i = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    i = std::min(i, mu.size() - 1);
    const auto x = mu.position(i);
    std::copy(x.begin(), x.end(), pos.begin() + static_cast<std::ptrdiff_t>(j * d));
  }
  return ParticleCloud::uniform(d, std::move(pos), mu.time());
}

namespace {

void check_init_time(const ParticleCloud& init, double t0) {
  if (std::abs(init.time() - t0) > 1e-12 * std::max(1.0, std::abs(t0)))
    throw ConfigError("initial cloud time " + std::to_string(init.time()) + " differs from t0=" + std::to_string(t0));
}

Trajectory run(const ModelSpec& ms, const ParticleCloud& x_init, std::optional<std::vector<double>> bar_init,
               const SimConfig& cfg, const NoiseSource& noise) {
  const std::uint64_t steps = cfg.step_count();
  const double dt = (cfg.t1 - cfg.t0) / static_cast<double>(steps);
  Trajectory traj;
  traj.config = cfg;
  traj.dt_effective = dt;
  traj.n_steps = steps;
  traj.model = std::make_shared<const ModelSpec>(ms);
  const bool coupled = bar_init.has_value();
  EnsembleStepper stepper(ms, x_init.with_time(cfg.t0), cfg.t0, dt, noise ? noise : counter_noise(cfg.seed),
                          cfg.blowup_radius, std::move(bar_init));
  auto record = [&] {
    traj.snapshots.push_back(stepper.cloud());
    if (coupled) traj.coupled.push_back(stepper.coupled_cloud());
  };
  record();
  try {
    while (stepper.steps_taken() < steps) {
      stepper.step();
      if (stepper.steps_taken() % cfg.record_stride == 0) record();
    }
  } catch (const BlowUpError& e) {
    throw e.with_partial(std::move(traj));
  }
  return traj;
}

}  // namespace

Trajectory simulate_flow(const ModelSpec& ms, const ParticleCloud& init, const SimConfig& cfg,
                         const NoiseSource& noise) {
  cfg.validate(ms.period());
  check_init_time(init, cfg.t0);
  if (init.dim() != ms.dim()) throw DimensionError("initial cloud dimension does not match the model");
  const ParticleCloud x0 = init.size() == cfg.N ? init : resample(init, cfg.N, cfg.seed);
  return run(ms, x0, std::nullopt, cfg, noise);
}

Trajectory simulate_coupled(const ModelSpec& ms, std::span<const double> x0, const ParticleCloud& mu0,
                            const SimConfig& cfg, const NoiseSource& noise) {
  cfg.validate(ms.period());
  check_init_time(mu0, cfg.t0);
  if (x0.size() != static_cast<std::size_t>(ms.dim()) || mu0.dim() != ms.dim())
    throw DimensionError("initial data dimension does not match the model");
  const ParticleCloud xs = resample(mu0, cfg.N, cfg.seed);
  std::vector<double> bar;
  bar.reserve(cfg.N * x0.size());
  for (std::size_t i = 0; i < cfg.N; ++i) bar.insert(bar.end(), x0.begin(), x0.end());
  return run(ms, xs, std::move(bar), cfg, noise);
}

Trajectory simulate_coupled(const ModelSpec& ms, const ParticleCloud& x_init, const ParticleCloud& xbar_init,
                            const SimConfig& cfg, const NoiseSource& noise) {
  cfg.validate(ms.period());
  check_init_time(x_init, cfg.t0);
  if (x_init.size() != cfg.N || xbar_init.size() != cfg.N)
    throw ConfigError("explicit coupled ensembles must both hold N particles");
  if (x_init.dim() != ms.dim() || xbar_init.dim() != ms.dim())
    throw DimensionError("initial data dimension does not match the model");
  for (std::size_t i = 0; i < cfg.N; ++i)
    if (x_init.weight(i) != xbar_init.weight(i)) throw ConfigError("coupled ensembles must carry equal weights");
  return run(ms, x_init,
             std::vector<double>(xbar_init.positions().begin(), xbar_init.positions().end()), cfg, noise);
}

DistanceValue flow_semigroup_gap(const ModelSpec& ms, const ParticleCloud& mu0, double s, double u, double t,
                                 const SimConfig& cfg) {
  if (!(s < u && u < t)) throw ConfigError("flow_semigroup_gap needs s < u < t");
  SimConfig base = cfg;
  base.t0 = s;
  base.t1 = t;
  base.validate(ms.period());
  check_init_time(mu0, s);
  // common step h <= dt with both legs an integer number of steps
  const double first = u - s;
  const double second = t - u;
  const std::uint64_t lo = snapped_steps(first, cfg.dt);
  std::uint64_t n1 = 0;
  std::uint64_t n2 = 0;
  for (std::uint64_t k = lo; k < lo + 100000; ++k) {
    const double r = second * static_cast<double>(k) / first;
    const double rr = std::round(r);
    if (rr >= 1.0 && std::abs(r - rr) <= 1e-9 * rr) {
      n1 = k;
      n2 = static_cast<std::uint64_t>(rr);
      break;
    }
  }
  if (n1 == 0) throw ConfigError("legs s->u and u->t admit no common step");
  const double h = first / static_cast<double>(n1);

  const ParticleCloud init = mu0.size() == cfg.N ? mu0 : resample(mu0, cfg.N, derive_seed(cfg.seed, 0));
  SimConfig one = base;
  one.dt = h;
  one.record_stride = n1 + n2;
  one.seed = derive_seed(cfg.seed, 1);
  const Trajectory direct = run(ms, init, std::nullopt, one, counter_noise(one.seed));

  SimConfig leg1 = one;
  leg1.t1 = u;
  leg1.record_stride = n1;
  leg1.seed = derive_seed(cfg.seed, 2);
  const Trajectory a = run(ms, init, std::nullopt, leg1, counter_noise(leg1.seed));
  SimConfig leg2 = one;
  leg2.t0 = u;
  leg2.record_stride = n2;
  leg2.seed = derive_seed(cfg.seed, 3);
  const Trajectory b = run(ms, a.snapshots.back(), std::nullopt, leg2, counter_noise(leg2.seed));
  return w2_distance(direct.snapshots.back(), b.snapshots.back());
}

}  // namespace mvlab
