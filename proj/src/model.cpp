#include "mvlab/model.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

#include "mvlab/error.hpp"
#include "mvlab/measure.hpp"

namespace mvlab {

struct ModelSpec::Impl {
  int d = 1;
  int m = 1;
  double T = 1.0;
  std::vector<Expr> drift[2];
  std::vector<Expr> diffusion[2];
  bool coupled_drift = false;
  bool coupled_diffusion = false;
  std::optional<double> radius;
  std::vector<Poly> drift_poly[2];
  std::vector<Poly> diffusion_poly[2];
  std::vector<std::vector<int>> observables[2];
  std::string label;
};

namespace {

int slot(Which w) { return w == Which::kMain ? 0 : 1; }

void validate_expr(const Expr& e, int d, double T, const std::string& where) {
  if (e.max_coordinate() >= d)
    throw ConfigError(where + ": uses coordinate x" + std::to_string(e.max_coordinate() + 1) + " but d=" +
                      std::to_string(d));
  for (double p : e.time_periods())
    if (p != T) throw ConfigError(where + ": time atom period differs from T");
  for (const auto& a : e.observables())
    if (a.size() != static_cast<std::size_t>(d))
      throw ConfigError(where + ": observable multi-index length must equal d=" + std::to_string(d));
  if (e.degree() > kMaxPolyDegree) throw ConfigError(where + ": polynomial degree exceeds 6");
}

void add_observables(std::vector<std::vector<int>>& out, const Poly& p) {
  for (auto& a : p.observables())
    if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(a);
}

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

ModelSpec::ModelSpec(int d, int m, double period, std::vector<Expr> drift, std::vector<Expr> diffusion,
                     std::optional<std::vector<Expr>> coupled_drift,
                     std::optional<std::vector<Expr>> coupled_diffusion, std::optional<double> trunc_radius) {
  if (d < 1 || d > kMaxDim) throw ConfigError("model dimension d must lie in 1..3");
  if (m < 1) throw ConfigError("Brownian dimension m must be positive");
  if (!(period > 0.0) || !std::isfinite(period)) throw ConfigError("period T must be positive and finite");
  if (trunc_radius && !(*trunc_radius > 0.0 && std::isfinite(*trunc_radius)))
    throw ConfigError("trunc_radius must be positive and finite");
  auto impl = std::make_shared<Impl>();
  impl->d = d;
  impl->m = m;
  impl->T = period;
  impl->radius = trunc_radius;
  impl->coupled_drift = coupled_drift.has_value();
  impl->coupled_diffusion = coupled_diffusion.has_value();
  impl->drift[0] = std::move(drift);
  impl->diffusion[0] = std::move(diffusion);
  impl->drift[1] = coupled_drift ? std::move(*coupled_drift) : impl->drift[0];
  impl->diffusion[1] = coupled_diffusion ? std::move(*coupled_diffusion) : impl->diffusion[0];
  const char* names[2] = {"", "coupled_"};
  for (int s = 0; s < 2; ++s) {
    if (impl->drift[s].size() != static_cast<std::size_t>(d))
      throw ConfigError(std::string(names[s]) + "drift must have d=" + std::to_string(d) + " components");
    if (impl->diffusion[s].size() != static_cast<std::size_t>(d * m))
      throw ConfigError(std::string(names[s]) + "diffusion must be d x m = " + std::to_string(d) + " x " +
                        std::to_string(m));
    for (int i = 0; i < d; ++i) {
      validate_expr(impl->drift[s][i], d, period, std::string(names[s]) + "drift[" + std::to_string(i) + "]");
      impl->drift_poly[s].push_back(Poly::from_expr(impl->drift[s][i], period));
      add_observables(impl->observables[s], impl->drift_poly[s].back());
    }
    for (int k = 0; k < d * m; ++k) {
      validate_expr(impl->diffusion[s][k], d, period,
                    std::string(names[s]) + "diffusion[" + std::to_string(k / m) + "][" + std::to_string(k % m) + "]");
      impl->diffusion_poly[s].push_back(Poly::from_expr(impl->diffusion[s][k], period));
      add_observables(impl->observables[s], impl->diffusion_poly[s].back());
    }
  }
  impl_ = std::move(impl);
}

ModelSpec ModelSpec::parse(int d, int m, double period, const std::vector<std::string>& drift,
                           const std::vector<std::vector<std::string>>& diffusion,
                           const std::optional<std::vector<std::string>>& coupled_drift,
                           const std::optional<std::vector<std::vector<std::string>>>& coupled_diffusion,
                           std::optional<double> trunc_radius) {
  if (!(period > 0.0) || !std::isfinite(period)) throw ConfigError("period T must be positive and finite");
  auto vec = [&](const std::vector<std::string>& v) {
    std::vector<Expr> out;
    for (const auto& s : v) out.push_back(parse_expr(s, period));
    return out;
  };
  auto mat = [&](const std::vector<std::vector<std::string>>& rows, const char* what) {
    std::vector<Expr> out;
    for (const auto& r : rows) {
      if (r.size() != static_cast<std::size_t>(m))
        throw ConfigError(std::string(what) + " rows must have m=" + std::to_string(m) + " entries");
      for (const auto& s : r) out.push_back(parse_expr(s, period));
    }
    return out;
  };
  std::optional<std::vector<Expr>> cd, cs;
  if (coupled_drift) cd = vec(*coupled_drift);
  if (coupled_diffusion) cs = mat(*coupled_diffusion, "coupled_diffusion");
  return ModelSpec(d, m, period, vec(drift), mat(diffusion, "diffusion"), std::move(cd), std::move(cs),
                   trunc_radius);
}

int ModelSpec::dim() const noexcept { return impl_->d; }
int ModelSpec::noise_dim() const noexcept { return impl_->m; }
double ModelSpec::period() const noexcept { return impl_->T; }
std::optional<double> ModelSpec::trunc_radius() const noexcept { return impl_->radius; }
bool ModelSpec::has_coupled_drift() const noexcept { return impl_->coupled_drift; }
bool ModelSpec::has_coupled_diffusion() const noexcept { return impl_->coupled_diffusion; }
const std::vector<Expr>& ModelSpec::drift(Which w) const noexcept { return impl_->drift[slot(w)]; }
const std::vector<Expr>& ModelSpec::diffusion(Which w) const noexcept { return impl_->diffusion[slot(w)]; }
const Poly& ModelSpec::drift_poly(Which w, int i) const { return impl_->drift_poly[slot(w)].at(i); }
const Poly& ModelSpec::diffusion_poly(Which w, int i, int j) const {
  return impl_->diffusion_poly[slot(w)].at(static_cast<std::size_t>(i * impl_->m + j));
}
const std::vector<std::vector<int>>& ModelSpec::observables(Which w) const noexcept {
  return impl_->observables[slot(w)];
}
const std::string& ModelSpec::label() const noexcept { return impl_->label; }

ModelSpec ModelSpec::with_label(std::string label) const {
  auto impl = std::make_shared<Impl>(*impl_);
  impl->label = std::move(label);
  return ModelSpec(std::shared_ptr<const Impl>(std::move(impl)));
}

ModelSpec ModelSpec::with_trunc_radius(std::optional<double> radius) const {
  if (radius && !(*radius > 0.0 && std::isfinite(*radius)))
    throw ConfigError("trunc_radius must be positive and finite");
  auto impl = std::make_shared<Impl>(*impl_);
  impl->radius = radius;
  return ModelSpec(std::shared_ptr<const Impl>(std::move(impl)));
}

ModelSpec ModelSpec::with_coupled(std::optional<std::vector<Expr>> drift,
                                  std::optional<std::vector<Expr>> diffusion) const {
  ModelSpec r(impl_->d, impl_->m, impl_->T, impl_->drift[0], impl_->diffusion[0], std::move(drift),
              std::move(diffusion), impl_->radius);
  return r.with_label(impl_->label);
}

CoefficientFrame ModelSpec::freeze(Which which, double t, std::span<const double> positions,
                                   std::span<const double> weights) const {
  const int s = slot(which);
  const int d = impl_->d;
  if (positions.size() != weights.size() * static_cast<std::size_t>(d))
    throw DimensionError("cloud does not match model dimension d=" + std::to_string(d));
  std::vector<double> values;
  const auto& obs = impl_->observables[s];
  if (!obs.empty()) {
    if (impl_->radius) {
      std::vector<double> clipped(positions.begin(), positions.end());
      for (std::size_t i = 0; i < weights.size(); ++i)
        clip_to_ball(std::span<double>(clipped.data() + i * d, d), *impl_->radius);
      values = moments(clipped, weights, d, obs);
    } else {
      values = moments(positions, weights, d, obs);
    }
  }
  const ObservableLookup lookup = [&](const std::vector<int>& alpha) {
    const auto it = std::find(obs.begin(), obs.end(), alpha);
    return values[static_cast<std::size_t>(it - obs.begin())];
  };
  CoefficientFrame f;
  f.dim_ = d;
  f.m_ = impl_->m;
  f.truncate_ = impl_->radius.has_value();
  f.radius_ = impl_->radius.value_or(0.0);
  for (const auto& p : impl_->drift_poly[s]) f.b_.emplace_back(p, d, t, lookup);
  for (const auto& p : impl_->diffusion_poly[s]) f.s_.emplace_back(p, d, t, lookup);
  return f;
}

CoefficientFrame ModelSpec::freeze(Which which, double t, const ParticleCloud& mu) const {
  if (mu.dim() != impl_->d)
    throw DimensionError("cloud dimension " + std::to_string(mu.dim()) + " does not match model d=" +
                         std::to_string(impl_->d));
  return freeze(which, t, mu.positions(), mu.weights());
}

void clip_to_ball(std::span<double> x, double radius) noexcept {
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  const double r2max = radius * radius;
  if (!(r2 > r2max)) return;
  double scale = radius / std::sqrt(r2);
  // nudge until the rounded image passes the same test, so clipping twice is a no-op
  for (int tries = 0; tries < 8; ++tries, scale = std::nextafter(scale, 0.0)) {
    double s2 = 0.0;
    for (double v : x) s2 += (v * scale) * (v * scale);
    if (s2 <= r2max) break;
  }
  for (double& v : x) v *= scale;
}

void CoefficientFrame::clip(const double* x, double* buf) const noexcept {
  std::copy(x, x + dim_, buf);
  clip_to_ball(std::span<double>(buf, dim_), radius_);
}

void CoefficientFrame::drift(const double* x, double* out) const noexcept {
  double buf[kMaxDim];
  const double* p = x;
  if (truncate_) {
    clip(x, buf);
    p = buf;
  }
  for (int i = 0; i < dim_; ++i) out[i] = b_[i](p);
}

void CoefficientFrame::diffusion(const double* x, double* out) const noexcept {
  double buf[kMaxDim];
  const double* p = x;
  if (truncate_) {
    clip(x, buf);
    p = buf;
  }
  for (std::size_t k = 0; k < s_.size(); ++k) out[k] = s_[k](p);
}

void CoefficientFrame::advance(const double* x, const double* xi, double dt, double sqrt_dt,
                               double* out) const noexcept {
  double buf[kMaxDim];
  double next[kMaxDim];
  const double* p = x;
  if (truncate_) {
    clip(x, buf);
    p = buf;
  }
  for (int i = 0; i < dim_; ++i) {
    double noise = 0.0;
    for (int j = 0; j < m_; ++j) noise += s_[static_cast<std::size_t>(i * m_ + j)](p) * xi[j];
    next[i] = x[i] + b_[i](p) * dt + noise * sqrt_dt;
  }
  std::copy(next, next + dim_, out);
}

namespace {

template <int DB, int DS>
void scalar_kernel(const double* cb, const double* cs, const double* in, double* out, const double* xi,
                   std::int64_t lo, std::int64_t hi, double dt, double sqrt_dt) noexcept {
  for (std::int64_t i = lo; i < hi; ++i) {
    const double v = in[i];
    double b = cb[DB];
    for (int k = DB - 1; k >= 0; --k) b = b * v + cb[k];
    double s = cs[DS];
    for (int k = DS - 1; k >= 0; --k) s = s * v + cs[k];
    out[i] = v + b * dt + (s * xi[i]) * sqrt_dt;
  }
}

using ScalarKernel = void (*)(const double*, const double*, const double*, double*, const double*, std::int64_t,
                              std::int64_t, double, double) noexcept;

template <int DB, int... DS>
constexpr std::array<ScalarKernel, sizeof...(DS)> kernel_row(std::integer_sequence<int, DS...>) {
  return {&scalar_kernel<DB, DS>...};
}

template <int... DB>
constexpr auto kernel_table(std::integer_sequence<int, DB...>) {
  return std::array<std::array<ScalarKernel, kMaxPolyDegree + 1>, sizeof...(DB)>{
      kernel_row<DB>(std::make_integer_sequence<int, kMaxPolyDegree + 1>{})...};
}

constexpr auto kScalarKernels = kernel_table(std::make_integer_sequence<int, kMaxPolyDegree + 1>{});

}  // namespace

std::size_t CoefficientFrame::advance_ensemble(const double* in, double* out, const double* xi, std::size_t n,
                                               double dt, double blowup) const noexcept {
  const double sqrt_dt = std::sqrt(dt);
  const double limit2 = blowup * blowup;
  const auto nn = static_cast<std::int64_t>(n);
  const int d = dim_;
  const int m = m_;
  const bool scalar = d == 1 && m == 1 && !truncate_;
  std::int64_t bad = nn;
#pragma omp parallel reduction(min : bad) if (nn > 4096)
  {
#ifdef _OPENMP
    const std::int64_t nt = omp_get_num_threads();
    const std::int64_t tid = omp_get_thread_num();
#else
    const std::int64_t nt = 1;
    const std::int64_t tid = 0;
#endif
    const std::int64_t lo = nn * tid / nt;
    const std::int64_t hi = nn * (tid + 1) / nt;
    if (scalar) {
      kScalarKernels[b_[0].dense_degree()][s_[0].dense_degree()](b_[0].dense(), s_[0].dense(), in, out, xi, lo, hi,
                                                                  dt, sqrt_dt);
      for (std::int64_t i = lo; i < hi; ++i)
        if (!(std::abs(out[i]) <= blowup)) {
          bad = std::min(bad, i);
          break;
        }
    } else {
      for (std::int64_t i = lo; i < hi; ++i) {
        double* y = out + i * d;
        advance(in + i * d, xi + i * m, dt, sqrt_dt, y);
        double r2 = 0.0;
        bool finite = true;
        for (int c = 0; c < d; ++c) {
          finite = finite && std::isfinite(y[c]);
          r2 += y[c] * y[c];
        }
        if (!finite || r2 > limit2) {
          bad = std::min(bad, i);
          break;
        }
      }
    }
  }
  return static_cast<std::size_t>(bad);
}

namespace {

ParticleCloud clipped_cloud(const ModelSpec& ms, const ParticleCloud& mu) {
  if (!ms.trunc_radius()) return mu;
  std::vector<double> pos(mu.positions().begin(), mu.positions().end());
  const int d = mu.dim();
  for (std::size_t i = 0; i < mu.size(); ++i) clip_to_ball(std::span<double>(pos.data() + i * d, d), *ms.trunc_radius());
  return ParticleCloud(d, std::move(pos), std::vector<double>(mu.weights().begin(), mu.weights().end()), mu.time());
}

void check_shapes(const ModelSpec& ms, std::span<const double> x, const ParticleCloud& mu) {
  if (x.size() != static_cast<std::size_t>(ms.dim()))
    throw DimensionError("point has dimension " + std::to_string(x.size()) + ", model d=" + std::to_string(ms.dim()));
  if (mu.dim() != ms.dim())
    throw DimensionError("cloud has dimension " + std::to_string(mu.dim()) + ", model d=" + std::to_string(ms.dim()));
}

}  // namespace

std::vector<double> eval_drift(const ModelSpec& ms, Which which, double t, std::span<const double> x,
                               const ParticleCloud& mu) {
  check_shapes(ms, x, mu);
  std::vector<double> p(x.begin(), x.end());
  if (ms.trunc_radius()) clip_to_ball(p, *ms.trunc_radius());
  const ParticleCloud nu = clipped_cloud(ms, mu);
  std::vector<double> out;
  for (const auto& e : ms.drift(which)) out.push_back(eval_expr(e, t, p, nu));
  return out;
}

std::vector<double> eval_diffusion(const ModelSpec& ms, Which which, double t, std::span<const double> x,
                                   const ParticleCloud& mu) {
  check_shapes(ms, x, mu);
  std::vector<double> p(x.begin(), x.end());
  if (ms.trunc_radius()) clip_to_ball(p, *ms.trunc_radius());
  const ParticleCloud nu = clipped_cloud(ms, mu);
  std::vector<double> out;
  for (const auto& e : ms.diffusion(which)) out.push_back(eval_expr(e, t, p, nu));
  return out;
}

std::vector<std::string> builtin_names() { return {"ex51_ou", "ex52_quartic", "ex53_forced"}; }

ParamMap builtin_defaults(std::string_view name) {
  if (name == "ex51_ou") return {{"a", 1.0}, {"b", 0.25}, {"c", 1.0}, {"sigma", 1.0}};
  if (name == "ex52_quartic") return {};
  if (name == "ex53_forced") return {{"a", 1.0}, {"b", 0.25}, {"c", 0.0}, {"sigma", 1.0}, {"f0", 0.5}, {"f1", 0.1}};
  throw ConfigError("unknown builtin model '" + std::string(name) + "'");
}

ModelSpec builtin_example(std::string_view name, const ParamMap& params) {
  ParamMap p = builtin_defaults(name);
  for (const auto& [k, v] : params) {
    if (!p.count(k)) throw ConfigError("builtin model '" + std::string(name) + "' has no parameter '" + k + "'");
    if (!std::isfinite(v)) throw ConfigError("parameter '" + k + "' must be finite");
    p[k] = v;
  }
  const double T = 2.0 * std::numbers::pi;
  std::string drift;
  std::string diffusion;
  if (name == "ex52_quartic") {
    drift = "-4*x1^3 + 0.125*x1*sin(w*t) + M[1]";
    diffusion = "sqrt(2)*x1";
  } else {
    drift = "-(" + fmt(p["a"]) + ")*x1 + (" + fmt(p["b"]) + ")*M[1] + (" + fmt(p["c"]) + ")*sin(w*t)";
    diffusion = fmt(p["sigma"]);
    if (name == "ex53_forced")
      drift += " + ((" + fmt(p["f0"]) + ")*cos(w*t) + (" + fmt(p["f1"]) + ")*M[1]*sin(w*t))";
  }
  return ModelSpec::parse(1, 1, T, {drift}, {{diffusion}}).with_label(std::string(name));
}

}  // namespace mvlab
