#include "mvlab/periodic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mvlab/error.hpp"
#include "mvlab/exact_sum.hpp"
#include "mvlab/poly.hpp"
#include "mvlab/rng.hpp"

namespace mvlab {

namespace {

ParticleCloud pool(const std::vector<const ParticleCloud*>& parts, double time) {
  const int d = parts.front()->dim();
  const double share = 1.0 / static_cast<double>(parts.size());
  std::vector<double> pos;
  std::vector<double> w;
  for (const ParticleCloud* c : parts) {
    pos.insert(pos.end(), c->positions().begin(), c->positions().end());
    for (double x : c->weights()) w.push_back(x * share);
  }
  // renormalise the rounding left by the split
  ExactSum total;
  for (double x : w) total.add(x);
  const double z = total.value();
  if (z != 1.0)
    for (double& x : w) x /= z;
  return ParticleCloud(d, std::move(pos), std::move(w), time);
}

std::size_t snapshot_at(const std::vector<double>& times, double t, double tol) {
  const auto it = std::lower_bound(times.begin(), times.end(), t - tol);
  if (it == times.end() || std::abs(*it - t) > tol)
    throw ConfigError("no snapshot at t=" + std::to_string(t) + "; the record stride must divide T/m");
  return static_cast<std::size_t>(it - times.begin());
}

double phase_distance(const ParticleCloud& a, const ParticleCloud& b, int n_proj, std::uint64_t seed, bool& exact) {
  const DistanceValue v = w2_distance(a, b, n_proj, seed);
  exact = exact && v.exact;
  return v.value;
}

}  // namespace

PhaseMeasureSet kb_average(const Trajectory& traj, double s0, double period, std::size_t n, std::size_t m) {
  if (n < 1 || m < 2) throw ConfigError("kb_average needs n >= 1 and m >= 2");
  if (traj.snapshots.empty()) throw ConfigError("trajectory has no snapshots");
  const auto times = traj.times();
  const double tol = 1e-6 * std::max(1.0, period);
  const double need = s0 + static_cast<double>(n) * period + static_cast<double>(m - 1) * period / static_cast<double>(m);
  if (times.back() < need - tol) throw ConfigError("trajectory does not span the requested periods");
  PhaseMeasureSet out;
  out.period = period;
  out.s0 = s0;
  out.periods_averaged = n;
  out.seed = traj.config.seed;
  out.N = traj.snapshots.front().size();
  out.dt = traj.dt_effective;
  for (std::size_t j = 0; j < m; ++j) {
    const double phase = period * static_cast<double>(j) / static_cast<double>(m);
    std::vector<const ParticleCloud*> parts;
    for (std::size_t k = 1; k <= n; ++k)
      parts.push_back(&traj.snapshots[snapshot_at(times, s0 + phase + static_cast<double>(k) * period, tol)]);
    out.phases.push_back(phase);
    out.clouds.push_back(pool(parts, phase));
  }
  return out;
}

void CertifyConfig::validate(double period) const {
  SimConfig probe = sim;
  probe.t1 = sim.t0 + period;
  probe.record_stride = 1;
  probe.validate(period);
  if (phases < 2) throw ConfigError("phases must be at least 2");
  if (trailing < 2) throw ConfigError("trailing must be at least 2");
  if (!(tol > 0.0)) throw ConfigError("tol must be positive");
  for (double r : tail_radii)
    if (!(r > 0.0)) throw ConfigError("tail radii must be positive");
  if (n_proj < 1) throw ConfigError("n_proj must be positive");
}

std::uint64_t CertifyConfig::steps_per_period(double period) const {
  const auto m = static_cast<std::uint64_t>(phases);
  const double per_phase = period / static_cast<double>(m) / sim.dt;
  const auto k = static_cast<std::uint64_t>(std::ceil(per_phase - 1e-9 * std::max(1.0, per_phase)));
  return m * std::max<std::uint64_t>(k, 1);
}

namespace {

SimConfig phase_grid_config(const CertifyConfig& cfg, double period, double periods) {
  const std::uint64_t spp = cfg.steps_per_period(period);
  SimConfig s = cfg.sim;
  s.dt = period / static_cast<double>(spp);
  s.t1 = s.t0 + periods * period;
  s.record_stride = spp / cfg.phases;
  return s;
}

}  // namespace

Certification certify_trajectory(const Trajectory& traj, const CertifyConfig& cfg) {
  if (!traj.model) throw ConfigError("trajectory carries no model");
  const double T = traj.model->period();
  cfg.validate(T);
  const std::size_t m = cfg.phases;
  const double grid = traj.dt_effective * static_cast<double>(traj.config.record_stride);
  if (std::abs(grid - T / static_cast<double>(m)) > 1e-9 * T)
    throw ConfigError("trajectory snapshots are not on the T/m phase grid");
  const std::size_t B = cfg.burn_in;
  const std::size_t last = (B + cfg.trailing) * m + (m - 1);
  if (traj.snapshots.size() <= last) throw ConfigError("trajectory is shorter than burn_in + trailing periods");

  Certification out;
  PeriodicCertificate& cert = out.certificate;
  cert.tol = cfg.tol;
  cert.config = cfg;
  cert.dt_effective = traj.dt_effective;
  cert.model_label = traj.model->label();
  cert.tail_radii = cfg.tail_radii;
  cert.distances.assign(m, {});
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = 0; k < cfg.trailing; ++k) {
      const auto& a = traj.snapshots[(B + k) * m + j];
      const auto& b = traj.snapshots[(B + k + 1) * m + j];
      const double dist = phase_distance(a, b, cfg.n_proj, derive_seed(cfg.sim.seed, 0x9a5e + j), cert.exact_distances);
      cert.distances[j].push_back(dist);
      cert.max_distance = std::max(cert.max_distance, dist);
    }
  cert.pass = cert.max_distance <= cfg.tol;

  PhaseMeasureSet& ps = out.phase_set;
  ps.period = T;
  ps.s0 = traj.snapshots.front().time() + static_cast<double>(B) * T;
  ps.periods_averaged = cfg.trailing + 1;
  ps.seed = traj.config.seed;
  ps.N = traj.snapshots.front().size();
  ps.dt = traj.dt_effective;
  for (std::size_t j = 0; j < m; ++j) {
    std::vector<const ParticleCloud*> parts;
    for (std::size_t k = 0; k <= cfg.trailing; ++k) parts.push_back(&traj.snapshots[(B + k) * m + j]);
    ps.phases.push_back(T * static_cast<double>(j) / static_cast<double>(m));
    ps.clouds.push_back(pool(parts, ps.phases.back()));
  }
  for (double R : cfg.tail_radii) {
    double worst = 0.0;
    for (const auto& c : ps.clouds) worst = std::max(worst, tail_mass(c, R));
    cert.tail_profile.push_back(worst);
  }
  return out;
}

Certification certify_periodic(const ModelSpec& ms, const ParticleCloud& init, const CertifyConfig& cfg) {
  const double T = ms.period();
  cfg.validate(T);
  const double periods = static_cast<double>(cfg.burn_in + cfg.trailing) +
                         static_cast<double>(cfg.phases - 1) / static_cast<double>(cfg.phases);
  const SimConfig sim = phase_grid_config(cfg, T, periods);
  const Trajectory traj = simulate_flow(ms, init.with_time(sim.t0), sim);
  return certify_trajectory(traj, cfg);
}

PeriodMapResult period_map_iterate(const ModelSpec& ms, const ParticleCloud& init, const CertifyConfig& cfg,
                                   std::size_t max_iters, double tol) {
  const double T = ms.period();
  cfg.validate(T);
  if (max_iters < 1) throw ConfigError("max_iters must be at least 1");
  if (!(tol > 0.0)) throw ConfigError("tol must be positive");
  SimConfig sim = phase_grid_config(cfg, T, 1.0);
  ParticleCloud mu = init.size() == sim.N ? init.with_time(sim.t0)
                                          : resample(init, sim.N, derive_seed(sim.seed, 0)).with_time(sim.t0);
  PeriodMapResult out;
  PeriodMapLog& log = out.log;
  double best = std::numeric_limits<double>::infinity();
  std::vector<ParticleCloud> best_phases;
  std::vector<ParticleCloud> phases;
  bool exact = true;
  for (std::size_t it = 0; it < max_iters; ++it) {
    sim.seed = derive_seed(cfg.sim.seed, it + 1);
    const Trajectory traj = simulate_flow(ms, mu, sim);
    phases.assign(traj.snapshots.begin(), traj.snapshots.begin() + static_cast<std::ptrdiff_t>(cfg.phases));
    ParticleCloud next = traj.snapshots.back().with_time(sim.t0);
    const double dist = phase_distance(next, mu, cfg.n_proj, derive_seed(cfg.sim.seed, 0x9a5e), exact);
    log.distances.push_back(dist);
    log.iterations = it + 1;
    if (dist < best) {
      best = dist;
      best_phases = phases;
      log.best_iteration = it;
    }
    mu = std::move(next);
    if (dist <= tol) {
      log.converged = true;
      break;
    }
  }
  if (!log.converged) {
    log.returned_best = true;
    phases = best_phases;
  }
  PhaseMeasureSet& ps = out.phase_set;
  ps.period = T;
  ps.s0 = sim.t0;
  ps.periods_averaged = 1;
  ps.seed = cfg.sim.seed;
  ps.N = sim.N;
  ps.dt = sim.dt;
  for (std::size_t j = 0; j < cfg.phases; ++j) {
    ps.phases.push_back(T * static_cast<double>(j) / static_cast<double>(cfg.phases));
    ps.clouds.push_back(phases[j].with_time(ps.phases.back()));
  }
  return out;
}

CesaroReport cesaro_functional_convergence(const ModelSpec& ms, const ParticleCloud& init, const Expr& f,
                                           const CertifyConfig& cfg, const std::vector<std::size_t>& ladder) {
  const double T = ms.period();
  cfg.validate(T);
  if (ladder.empty()) throw ConfigError("ladder must not be empty");
  for (std::size_t i = 0; i < ladder.size(); ++i)
    if (ladder[i] < 1 || (i > 0 && ladder[i] <= ladder[i - 1]))
      throw ConfigError("ladder must be strictly increasing positive period counts");
  if (f.max_coordinate() >= ms.dim()) throw DimensionError("functional uses a coordinate beyond d");
  for (double p : f.time_periods())
    if (p != T) throw ConfigError("functional time atoms must share the model period");
  const Poly fp = Poly::from_expr(f, T);
  const auto obs = fp.observables();
  const std::size_t n_max = ladder.back();
  const SimConfig sim = phase_grid_config(cfg, T, static_cast<double>(n_max));
  const Trajectory traj = simulate_flow(ms, init.with_time(sim.t0), sim);
  const std::size_t m = cfg.phases;
  const int d = ms.dim();

  CesaroReport rep;
  rep.ladder = ladder;
  std::vector<double> g(traj.snapshots.size());
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
    const auto& mu = traj.snapshots[k];
    const auto vals = moments(mu.positions(), mu.weights(), d, obs);
    const ObservableLookup lookup = [&](const std::vector<int>& a) {
      return vals[static_cast<std::size_t>(std::find(obs.begin(), obs.end(), a) - obs.begin())];
    };
    const BoundPoly bp(fp, d, mu.time(), lookup);
    ExactSum s;
    for (std::size_t i = 0; i < mu.size(); ++i) {
      const double v = bp(mu.position(i).data());
      if (!std::isfinite(v)) throw EvalError("functional", v);
      rep.sup_abs_integrand = std::max(rep.sup_abs_integrand, std::abs(v));
      s.add(mu.weight(i) * v);
    }
    g[k] = s.value();
  }
  const double h = T / static_cast<double>(m);
  std::vector<double> per_period;
  for (std::size_t p = 0; p < n_max; ++p) {
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) acc += 0.5 * (g[p * m + j] + g[p * m + j + 1]) * h;
    per_period.push_back(acc / T);
  }
  for (std::size_t n : ladder) {
    double acc = 0.0;
    for (std::size_t p = 0; p < n; ++p) acc += per_period[p];
    rep.averages.push_back(acc / static_cast<double>(n));
  }
  for (std::size_t i = 1; i < rep.averages.size(); ++i) rep.increments.push_back(std::abs(rep.averages[i] - rep.averages[i - 1]));
  for (std::size_t i = 1; i < rep.increments.size(); ++i)
    if (rep.increments[i] > rep.increments[i - 1]) rep.non_monotone = true;
  if (n_max >= 2) {
    double mean = 0.0;
    for (double v : per_period) mean += v;
    mean /= static_cast<double>(n_max);
    double var = 0.0;
    for (double v : per_period) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n_max - 1);
    rep.batch_standard_error = std::sqrt(var / static_cast<double>(n_max));
  }
  return rep;
}

SweepReport parameter_sweep(const std::vector<ModelSpec>& models, const CertifyConfig& cfg, const ParticleCloud& init) {
  if (models.empty()) throw ConfigError("sweep needs at least one model");
  for (const auto& ms : models)
    if (ms.dim() != models.front().dim() || ms.period() != models.front().period())
      throw ConfigError("sweep members must share d and T");
  SweepReport rep;
  rep.tail_radii = cfg.tail_radii;
  rep.sup_tail.assign(cfg.tail_radii.size(), 0.0);
  std::vector<std::optional<PhaseMeasureSet>> sets;
  for (std::size_t k = 0; k < models.size(); ++k) {
    SweepMember member;
    member.label = models[k].label().empty() ? "member " + std::to_string(k) : models[k].label();
    CertifyConfig c = cfg;
    c.sim.seed = derive_seed(cfg.sim.seed, 0x5eed00 + k);
    try {
      Certification res = certify_periodic(models[k], init, c);
      member.certified = res.certificate.pass;
      member.max_distance = res.certificate.max_distance;
      member.tail_profile = res.certificate.tail_profile;
      if (!member.certified) member.failure = "trailing distance above tolerance";
      for (std::size_t r = 0; r < rep.sup_tail.size(); ++r) rep.sup_tail[r] = std::max(rep.sup_tail[r], member.tail_profile[r]);
      sets.emplace_back(std::move(res.phase_set));
    } catch (const BlowUpError& e) {
      member.blew_up = true;
      member.failure = e.what();
      sets.emplace_back(std::nullopt);
    }
    rep.members.push_back(std::move(member));
  }
  const auto& last = sets.back();
  for (std::size_t k = 0; k < models.size(); ++k) {
    if (!sets[k] || !last) {
      rep.members[k].distance_to_last = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    double worst = 0.0;
    for (std::size_t j = 0; j < last->clouds.size(); ++j)
      worst = std::max(worst, w2_distance(sets[k]->clouds[j], last->clouds[j], cfg.n_proj,
                                          derive_seed(cfg.sim.seed, 0x9a5e + j)).value);
    rep.members[k].distance_to_last = worst;
  }
  return rep;
}

}  // namespace mvlab
