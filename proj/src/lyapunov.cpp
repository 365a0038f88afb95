#include "mvlab/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mvlab/error.hpp"
#include "mvlab/exact_sum.hpp"
#include "mvlab/rng.hpp"

namespace mvlab {

namespace {

LyapunovSpec::Parts compile(const Expr& e, double period, int d) {
  LyapunovSpec::Parts p;
  p.value = Poly::from_expr(e, period);
  p.dt = p.value.derivative_t();
  for (int i = 0; i < d; ++i) p.grad.push_back(p.value.derivative_x(i));
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) p.hess.push_back(p.grad[i].derivative_x(j));
  return p;
}

const ObservableLookup kNoObservables = [](const std::vector<int>&) -> double {
  throw ConfigError("Lyapunov integrands cannot contain observables");
};

std::vector<BoundPoly> bind_all(const std::vector<Poly>& ps, int d, double t) {
  std::vector<BoundPoly> out;
  out.reserve(ps.size());
  for (const auto& p : ps) out.emplace_back(p, d, t, kNoObservables);
  return out;
}

void check_point(std::span<const double> x, int d) {
  if (x.size() != static_cast<std::size_t>(d))
    throw DimensionError("point dimension " + std::to_string(x.size()) + " does not match d=" + std::to_string(d));
}

}  // namespace

LyapunovSpec::LyapunovSpec(Expr v0, Expr v1, double period, int dim)
    : v0_(std::move(v0)), v1_(std::move(v1)), period_(period), dim_(dim) {
  if (dim < 1 || dim > kMaxDim) throw ConfigError("Lyapunov dimension must lie in 1..3");
  if (!(period > 0.0)) throw ConfigError("Lyapunov period must be positive");
  for (const Expr* e : {&v0_, &v1_}) {
    if (e->has_observables()) throw ConfigError("v0 and v1 must not contain observables");
    if (e->max_coordinate() >= dim) throw ConfigError("Lyapunov integrand uses a coordinate beyond d");
    if (e->degree() > kMaxPolyDegree) throw ConfigError("Lyapunov integrand degree exceeds 6");
    for (double p : e->time_periods())
      if (p != period) throw ConfigError("Lyapunov time atoms must share the model period");
  }
  p0_ = compile(v0_, period, dim);
  p1_ = compile(v1_, period, dim);
}

LyapunovSpec LyapunovSpec::parse(const std::string& v0, const std::string& v1, double period, int dim) {
  return LyapunovSpec(parse_expr(v0, period), parse_expr(v1, period), period, dim);
}

double LyapunovSpec::v0_value(double t, std::span<const double> x) const {
  check_point(x, dim_);
  return BoundPoly(p0_.value, dim_, t, kNoObservables)(x.data());
}

double LyapunovSpec::v1_value(double t, std::span<const double> y) const {
  check_point(y, dim_);
  return BoundPoly(p1_.value, dim_, t, kNoObservables)(y.data());
}

void LyapunovSpec::v1_gradient(double t, std::span<const double> y, std::span<double> out) const {
  check_point(y, dim_);
  for (int i = 0; i < dim_; ++i) out[i] = BoundPoly(p1_.grad[i], dim_, t, kNoObservables)(y.data());
}

void LyapunovSpec::v1_hessian(double t, std::span<const double> y, std::span<double> out) const {
  check_point(y, dim_);
  for (int k = 0; k < dim_ * dim_; ++k) out[k] = BoundPoly(p1_.hess[k], dim_, t, kNoObservables)(y.data());
}

double LyapunovSpec::value(double t, std::span<const double> x, const ParticleCloud& mu) const {
  check_point(x, dim_);
  if (mu.dim() != dim_) throw DimensionError("cloud dimension does not match the Lyapunov dimension");
  const BoundPoly v1(p1_.value, dim_, t, kNoObservables);
  ExactSum s;
  for (std::size_t i = 0; i < mu.size(); ++i) s.add(mu.weight(i) * v1(mu.position(i).data()));
  return v0_value(t, x) + s.value();
}

double LyapunovSpec::min_on_grid(double half_width, int points_per_axis, int time_points) const {
  double lo = std::numeric_limits<double>::infinity();
  const int n = std::max(2, points_per_axis);
  std::size_t total = 1;
  for (int c = 0; c < dim_; ++c) total *= static_cast<std::size_t>(n);
  std::vector<double> x(static_cast<std::size_t>(dim_));
  for (int k = 0; k < time_points; ++k) {
    const double t = period_ * k / time_points;
    const BoundPoly a(p0_.value, dim_, t, kNoObservables);
    const BoundPoly b(p1_.value, dim_, t, kNoObservables);
    for (std::size_t idx = 0; idx < total; ++idx) {
      std::size_t r = idx;
      for (int c = 0; c < dim_; ++c) {
        x[c] = -half_width + 2.0 * half_width * static_cast<double>(r % n) / (n - 1);
        r /= n;
      }
      lo = std::min({lo, a(x.data()), b(x.data())});
    }
  }
  return lo;
}

GeneratorFrame::GeneratorFrame(const LyapunovSpec& ls, const ModelSpec& ms, double t, const ParticleCloud& mu)
    : d_(ms.dim()),
      m_(ms.noise_dim()),
      main_(ms.freeze(Which::kMain, t, mu)),
      bar_(ms.freeze(Which::kCoupled, t, mu)) {
  if (ls.dim() != ms.dim()) throw DimensionError("Lyapunov and model dimensions differ");
  if (std::abs(ls.period() - ms.period()) > 1e-12 * ms.period())
    throw ConfigError("Lyapunov period differs from the model period");
  dt0_ = bind_all({ls.part0().dt}, d_, t);
  g0_ = bind_all(ls.part0().grad, d_, t);
  h0_ = bind_all(ls.part0().hess, d_, t);
  dt1_ = bind_all({ls.part1().dt}, d_, t);
  g1_ = bind_all(ls.part1().grad, d_, t);
  h1_ = bind_all(ls.part1().hess, d_, t);
  bool v1_zero = dt1_[0].is_zero();
  for (const auto& g : g1_) v1_zero = v1_zero && g.is_zero();
  if (!v1_zero) {
    ExactSum s;
    for (std::size_t i = 0; i < mu.size(); ++i) s.add(mu.weight(i) * measure_integrand(mu.position(i)));
    measure_part_ = s.value();
  }
}

namespace {

double generator_at(const CoefficientFrame& f, const BoundPoly& dt, const std::vector<BoundPoly>& g,
                    const std::vector<BoundPoly>& h, const double* x, int d, int m) {
  double b[kMaxDim];
  double sig[kMaxDim * 8];
  std::vector<double> sig_heap;
  double* s = sig;
  if (d * m > kMaxDim * 8) {
    sig_heap.resize(static_cast<std::size_t>(d * m));
    s = sig_heap.data();
  }
  f.drift(x, b);
  f.diffusion(x, s);
  double r = dt(x);
  for (int i = 0; i < d; ++i) r += b[i] * g[i](x);
  double tr = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      const double hij = h[static_cast<std::size_t>(i * d + j)](x);
      if (hij == 0.0) continue;
      double a = 0.0;
      for (int l = 0; l < m; ++l) a += s[i * m + l] * s[j * m + l];
      tr += a * hij;
    }
  return r + 0.5 * tr;
}

}  // namespace

double GeneratorFrame::point_part(std::span<const double> x) const {
  check_point(x, d_);
  return generator_at(bar_, dt0_[0], g0_, h0_, x.data(), d_, m_);
}

double GeneratorFrame::measure_integrand(std::span<const double> y) const {
  return generator_at(main_, dt1_[0], g1_, h1_, y.data(), d_, m_);
}

double GeneratorFrame::operator()(std::span<const double> x) const { return point_part(x) + measure_part_; }

double eval_LV(const LyapunovSpec& ls, const ModelSpec& ms, double t, std::span<const double> x,
               const ParticleCloud& mu) {
  check_point(x, ms.dim());
  return GeneratorFrame(ls, ms, t, mu)(x);
}

LionsCheck check_lions_closed_form(const LyapunovSpec& ls, double t, std::span<const double> y_grid, double eps,
                                   double h) {
  const int d = ls.dim();
  if (y_grid.size() % static_cast<std::size_t>(d) != 0) throw DimensionError("y_grid must hold whole points");
  std::vector<double> ref_pos;
  for (double v : {-1.0, 0.5, 2.0})
    for (int c = 0; c < d; ++c) ref_pos.push_back(v * (1.0 + 0.1 * c));
  const ParticleCloud mu = ParticleCloud::uniform(d, ref_pos, t);
  const std::vector<double> x(static_cast<std::size_t>(d), 0.0);
  const double base = ls.value(t, x, mu);
  auto flat = [&](std::span<const double> y) {
    const ParticleCloud mixed = ParticleCloud::mixture(mu, ParticleCloud::point_mass(y, t), 1.0 - eps);
    return (ls.value(t, x, mixed) - base) / eps;
  };
  LionsCheck out;
  std::vector<double> y(d), yp(d), ym(d), grad(d), gp(d), gm(d), hess(static_cast<std::size_t>(d * d));
  for (std::size_t p = 0; p < y_grid.size() / d; ++p) {
    std::copy(y_grid.begin() + p * d, y_grid.begin() + (p + 1) * d, y.begin());
    ls.v1_gradient(t, y, grad);
    ls.v1_hessian(t, y, hess);
    for (int i = 0; i < d; ++i) {
      yp = y;
      ym = y;
      yp[i] += h;
      ym[i] -= h;
      const double fd = (flat(yp) - flat(ym)) / (2.0 * h);
      out.max_gradient_error = std::max(out.max_gradient_error, std::abs(fd - grad[i]));
      ls.v1_gradient(t, yp, gp);
      ls.v1_gradient(t, ym, gm);
      for (int j = 0; j < d; ++j) {
        const double fh = (gp[j] - gm[j]) / (2.0 * h);
        out.max_hessian_error = std::max(out.max_hessian_error, std::abs(fh - hess[static_cast<std::size_t>(i * d + j)]));
      }
    }
  }
  out.max_error = std::max(out.max_gradient_error, out.max_hessian_error);
  return out;
}

namespace {

// Draws for one scan sample, addressed by (sample, counter) blocks.
class SampleDraws {
 public:
  SampleDraws(const CounterRng& rng, std::uint64_t sample) : rng_(rng), sample_(sample) {}
  double uniform() {
    if (u_left_ == 0) {
      u_ = rng_.uniforms(sample_, next_++);
      u_left_ = 2;
    }
    return u_[2 - u_left_--];
  }
  double normal() {
    if (z_left_ == 0) {
      z_ = rng_.normals(sample_, next_++);
      z_left_ = 4;
    }
    return z_[4 - z_left_--];
  }

 private:
  const CounterRng& rng_;
  std::uint64_t sample_;
  std::uint64_t next_ = 0;
  std::array<double, 2> u_{};
  std::array<double, 4> z_{};
  int u_left_ = 0, z_left_ = 0;
};

void scale_to_norm(std::vector<double>& v, double target) {
  double n2 = 0.0;
  for (double x : v) n2 += x * x;
  if (n2 == 0.0) {
    v[0] = target;
    return;
  }
  const double s = target / std::sqrt(n2);
  for (double& x : v) x *= s;
}

}  // namespace

RadialScanReport radial_scan(const LyapunovSpec& ls, const ModelSpec& ms, const std::vector<double>& radii,
                             const ScanParams& params, std::uint64_t seed) {
  if (radii.empty()) throw ConfigError("radial scan needs at least one radius");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0.0)) throw ConfigError("scan radii must be positive");
    if (i > 0 && !(radii[i] > radii[i - 1])) throw ConfigError("scan radii must be strictly increasing");
  }
  if (params.samples_per_radius < 1 || params.cloud_points < 2 || params.max_components < 1)
    throw ConfigError("invalid scan parameters");
  const int d = ms.dim();
  const std::size_t np = params.cloud_points;
  RadialScanReport rep;
  rep.radii = radii;
  rep.params = params;
  rep.seed = seed;
  for (std::size_t r = 0; r < radii.size(); ++r) {
    const double R = radii[r];
    const CounterRng rng(derive_seed(seed, r), Stream::kRadialScan);
    double a_hat = -std::numeric_limits<double>::infinity();
    double v_hat = std::numeric_limits<double>::infinity();
    const auto ns = static_cast<std::int64_t>(params.samples_per_radius);
#pragma omp parallel for schedule(static) reduction(max : a_hat) reduction(min : v_hat)
    for (std::int64_t s = 0; s < ns; ++s) {
      SampleDraws draw(rng, static_cast<std::uint64_t>(s));
      const double t = ms.period() * draw.uniform();
      const double rad = R * (1.0 + params.shell_width * draw.uniform());
      const bool x_drives = draw.uniform() < 0.5;
      const bool two_point = draw.uniform() < 0.5;
      std::vector<double> pos;
      std::vector<double> w;
      if (two_point) {
        for (int k = 0; k < 2 * d; ++k) pos.push_back(draw.normal());
        const double p = draw.uniform();
        w = {p, 1.0 - p};
      } else {
        const int K = 1 + std::min(params.max_components - 1, static_cast<int>(draw.uniform() * params.max_components));
        std::vector<double> centers;
        for (int k = 0; k < K * d; ++k) centers.push_back(2.0 * draw.normal());
        for (std::size_t p = 0; p < np; ++p)
          for (int c = 0; c < d; ++c)
            pos.push_back(centers[(p % K) * d + c] + params.component_spread * draw.normal());
        w.assign(np, 1.0 / static_cast<double>(np));
      }
      // rescale so that |mu|_2 hits its target
      double m2 = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i)
        for (int c = 0; c < d; ++c) m2 += w[i] * pos[i * d + c] * pos[i * d + c];
      const double mu_target = x_drives ? rad * draw.uniform() : rad;
      if (m2 == 0.0) {
        pos[0] = mu_target;
        w.assign(w.size(), 0.0);
        w[0] = 1.0;
      } else {
        const double sc = mu_target / std::sqrt(m2);
        for (double& v : pos) v *= sc;
      }
      const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
      for (double& v : w) v /= wsum;
      std::vector<double> x(static_cast<std::size_t>(d));
      for (int c = 0; c < d; ++c) x[c] = draw.normal();
      scale_to_norm(x, x_drives ? rad : rad * draw.uniform());
      ParticleCloud mu(d, std::move(pos), std::move(w), t);
      const double lv = GeneratorFrame(ls, ms, t, mu)(x);
      const double v = ls.value(t, x, mu);
      a_hat = std::max(a_hat, lv);
      v_hat = std::min(v_hat, v);
    }
    rep.a_hat.push_back(a_hat);
    rep.v_hat.push_back(v_hat);
  }
  return rep;
}

double lambda_from_scan(const RadialScanReport& report, double margin, double floor) {
  double top = 0.0;
  for (double a : report.a_hat) top = std::max(top, a);
  return top * (1.0 + margin) + floor;
}

double scan_lambda(const LyapunovSpec& ls, const ModelSpec& ms, double r_max, const ScanParams& params,
                   std::uint64_t seed, std::size_t grid) {
  if (!(r_max > 0.0) || grid < 1) throw ConfigError("scan_lambda needs r_max > 0 and a nonempty grid");
  std::vector<double> radii(grid);
  for (std::size_t k = 0; k < grid; ++k) radii[k] = r_max * static_cast<double>(k + 1) / static_cast<double>(grid);
  return lambda_from_scan(radial_scan(ls, ms, radii, params, seed));
}

double lifted_tail_probability(const ParticleCloud& mu, double radius) {
  if (second_moment_norm(mu) > radius) return 1.0;
  return tail_mass(mu, radius);
}

namespace {

double effective_size(const ParticleCloud& mu) {
  ExactSum s;
  for (double w : mu.weights()) s.add(w * w);
  return 1.0 / s.value();
}

double mean_v(const LyapunovSpec& ls, const ParticleCloud& mu) {
  const int d = mu.dim();
  const BoundPoly v0(ls.part0().value, d, mu.time(), kNoObservables);
  const BoundPoly v1(ls.part1().value, d, mu.time(), kNoObservables);
  ExactSum s;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double* x = mu.position(i).data();
    s.add(mu.weight(i) * (v0(x) + v1(x)));
  }
  return s.value();
}

}  // namespace

ChebyshevReport chebyshev_tail_bound(const LyapunovSpec& ls, const ModelSpec& ms, const Trajectory& traj,
                                     double lambda, double radius, std::optional<double> v_hat) {
  if (traj.snapshots.empty()) throw ConfigError("trajectory has no snapshots");
  if (!(radius > 0.0)) throw ConfigError("radius must be positive");
  ChebyshevReport rep;
  rep.lambda = lambda;
  rep.radius = radius;
  double sup = -std::numeric_limits<double>::infinity();
  for (const auto& mu : traj.snapshots) {
    const GeneratorFrame g(ls, ms, mu.time(), mu);
    const auto n = static_cast<std::int64_t>(mu.size());
    double local = -std::numeric_limits<double>::infinity();
#pragma omp parallel for schedule(static) reduction(max : local)
    for (std::int64_t i = 0; i < n; ++i) local = std::max(local, g(mu.position(static_cast<std::size_t>(i))));
    sup = std::max(sup, local);
  }
  rep.visited_sup_lv = sup;
  if (lambda < sup)
    throw ConfigError("lambda=" + std::to_string(lambda) + " is below the visited sup of LV (" + std::to_string(sup) + ")");
  if (v_hat) {
    rep.v_hat = *v_hat;
  } else {
    ScanParams p;
    p.samples_per_radius = 4000;
    rep.v_hat = radial_scan(ls, ms, {radius}, p, 0x7a11).v_hat[0];
  }
  if (!(rep.v_hat > 0.0)) throw ConfigError("V_R estimate must be positive");
  const double s = traj.snapshots.front().time();
  rep.initial_ev = mean_v(ls, traj.snapshots.front());
  for (const auto& mu : traj.snapshots) {
    ChebyshevRow row;
    row.time = mu.time();
    row.empirical = lifted_tail_probability(mu, radius);
    row.standard_error = std::sqrt(row.empirical * (1.0 - row.empirical) / effective_size(mu));
    row.bound = (rep.initial_ev + lambda * (row.time - s)) / rep.v_hat;
    row.holds = row.empirical <= row.bound + 3.0 * row.standard_error;
    rep.holds = rep.holds && row.holds;
    rep.rows.push_back(row);
  }
  return rep;
}

TailCriteriaReport tail_criteria(const Trajectory& traj, const std::vector<double>& radii, double period) {
  if (traj.snapshots.size() < 2) throw ConfigError("tail criteria need at least two snapshots");
  if (!(period > 0.0)) throw ConfigError("period must be positive");
  const auto times = traj.times();
  const double s0 = times.front();
  const double span = times.back() - s0;
  const auto n = static_cast<std::size_t>(std::floor(span / period + 1e-9));
  if (n < 1) throw ConfigError("trajectory spans less than one period");
  const double tol = 1e-6 * std::max(1.0, period);
  auto index_at = [&](double t) -> std::size_t {
    const auto it = std::lower_bound(times.begin(), times.end(), t - tol);
    if (it == times.end() || std::abs(*it - t) > tol)
      throw ConfigError("no snapshot at t=" + std::to_string(t) + "; the stride must divide the period");
    return static_cast<std::size_t>(it - times.begin());
  };
  std::vector<std::size_t> period_idx;
  for (std::size_t k = 1; k <= n; ++k) period_idx.push_back(index_at(s0 + static_cast<double>(k) * period));
  const std::size_t last = period_idx.back();
  std::size_t per_period = 0;
  for (std::size_t j = 1; j <= last && times[j] - s0 <= period + tol; ++j) per_period = j;

  TailCriteriaReport rep;
  rep.periods = n;
  for (double R : radii) {
    if (!(R > 0.0)) throw ConfigError("tail radii must be positive");
    TailCriteriaRow row{R, 0.0, 0.0, 0.0, 0};
    std::vector<double> p(last + 1);
    for (std::size_t j = 0; j <= last; ++j) p[j] = lifted_tail_probability(traj.snapshots[j], R);
    for (std::size_t k : period_idx) row.cesaro_period_average += p[k];
    row.cesaro_period_average /= static_cast<double>(n);
    double integral = 0.0;
    for (std::size_t j = 1; j <= last; ++j) integral += 0.5 * (p[j] + p[j - 1]) * (times[j] - times[j - 1]);
    row.time_average = integral / (static_cast<double>(n) * period);
    // conditional tail after at most one period from inside U_{R/2}
    const double beta = 0.5 * R;
    std::vector<std::vector<char>> inside(last + 1), outside(last + 1);
    std::vector<bool> inside_ok(last + 1);
    for (std::size_t j = 0; j <= last; ++j) {
      const auto& mu = traj.snapshots[j];
      const bool mu_small = second_moment_norm(mu) <= beta;
      const bool mu_large = second_moment_norm(mu) > R;
      inside_ok[j] = mu_small;
      inside[j].resize(mu.size());
      outside[j].resize(mu.size());
      for (std::size_t i = 0; i < mu.size(); ++i) {
        double r2 = 0.0;
        for (double v : mu.position(i)) r2 += v * v;
        inside[j][i] = mu_small && r2 <= beta * beta;
        outside[j][i] = mu_large || r2 > R * R;
      }
    }
    const auto& w = traj.snapshots.front().weights();
    for (std::size_t j = 0; j < last; ++j) {
      if (!inside_ok[j]) continue;
      for (std::size_t k = j + 1; k <= std::min(last, j + per_period); ++k) {
        double num = 0.0;
        double den = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
          if (!inside[j][i]) continue;
          den += w[i];
          if (outside[k][i]) num += w[i];
        }
        if (den > 0.0) {
          row.alpha = std::max(row.alpha, num / den);
          ++row.alpha_pairs;
        }
      }
    }
    rep.rows.push_back(row);
  }
  return rep;
}

ItoCheckReport ito_increment_check(const LyapunovSpec& ls, const ModelSpec& ms, const ParticleCloud& init,
                                   const SimConfig& cfg) {
  cfg.validate(ms.period());
  const ParticleCloud x0 = init.size() == cfg.N ? init.with_time(cfg.t0) : resample(init, cfg.N, cfg.seed).with_time(cfg.t0);
  const std::uint64_t steps = cfg.step_count();
  const double dt = (cfg.t1 - cfg.t0) / static_cast<double>(steps);
  EnsembleStepper st(ms, x0, cfg.t0, dt, counter_noise(cfg.seed), cfg.blowup_radius);
  const int d = ms.dim();
  const std::size_t n = st.size();
  std::vector<double> before(n), lv(n);
  ItoCheckReport rep;
  double var_sum = 0.0;
  double n_eff = 0.0;
  {
    ExactSum s;
    for (double w : st.weights()) s.add(w * w);
    n_eff = 1.0 / s.value();
  }
  const auto nn = static_cast<std::int64_t>(n);
  ExactSum total_increment, total_generator;
  for (std::uint64_t k = 0; k < steps; ++k) {
    const double t = st.time();
    const ParticleCloud mu = st.cloud();
    const GeneratorFrame g(ls, ms, t, mu);
    const BoundPoly v0(ls.part0().value, d, t, kNoObservables);
    const BoundPoly v1(ls.part1().value, d, t, kNoObservables);
    const auto x = st.positions();
#pragma omp parallel for schedule(static) if (nn > 2048)
    for (std::int64_t i = 0; i < nn; ++i) {
      const double* xi = x.data() + i * d;
      before[i] = v0(xi) + v1(xi);
      lv[i] = g.point_part(std::span<const double>(xi, d)) + g.measure_integrand(std::span<const double>(xi, d));
    }
    st.step();
    const double t1 = st.time();
    const BoundPoly w0(ls.part0().value, d, t1, kNoObservables);
    const BoundPoly w1(ls.part1().value, d, t1, kNoObservables);
    const auto y = st.positions();
    const auto wts = st.weights();
    ExactSum inc, gen, zsum;
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double* yi = y.data() + i * d;
      const double dv = w0(yi) + w1(yi) - before[i];
      z[i] = dv - lv[i] * dt;
      inc.add(wts[i] * dv);
      gen.add(wts[i] * lv[i] * dt);
      zsum.add(wts[i] * z[i]);
    }
    const double zbar = zsum.value();
    ExactSum var;
    for (std::size_t i = 0; i < n; ++i) var.add(wts[i] * (z[i] - zbar) * (z[i] - zbar));
    var_sum += var.value() / n_eff;
    total_increment.add(inc.value());
    total_generator.add(gen.value());
  }
  rep.steps = steps;
  rep.sum_increment = total_increment.value();
  rep.sum_generator = total_generator.value();
  rep.discrepancy = rep.sum_increment - rep.sum_generator;
  rep.standard_error = std::sqrt(var_sum);
  rep.allowance = 3.0 * rep.standard_error + 10.0 * dt * dt * static_cast<double>(steps);
  rep.holds = std::abs(rep.discrepancy) <= rep.allowance;
  return rep;
}

}  // namespace mvlab
