#include "mvlab/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>

#include "mvlab/error.hpp"
#include "mvlab/io.hpp"
#include "mvlab/lyapunov.hpp"
#include "mvlab/parallel.hpp"
#include "mvlab/periodic.hpp"
#include "mvlab/report.hpp"
#include "mvlab/rng.hpp"
#include "mvlab/simulate.hpp"

namespace mvlab {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kTagInit = 0x494e4954ull;

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool verbose = false;
};

class Log {
 public:
  Log(std::ostream& err, bool on) : err_(err), on_(on) {}
  template <class... A>
  void operator()(const A&... parts) const {
    if (!on_) return;
    ((err_ << parts), ...);
    err_ << '\n';
  }

 private:
  std::ostream& err_;
  bool on_;
};

struct Context {
  Json cfg;
  fs::path base;  // directory of the config file
  fs::path out;
  Options opts;
};

Context load(const Options& o, std::initializer_list<const char*> keys, const char* command) {
  Context c;
  c.opts = o;
  c.cfg = read_json(o.config);
  require_known_keys(c.cfg, keys, std::string(command) + " config");
  c.base = fs::path(o.config).parent_path();
  if (!o.out.empty())
    c.out = o.out;
  else if (c.cfg.contains("out"))
    c.out = c.base / c.cfg["out"].get<std::string>();
  else
    throw ConfigError("no output directory: pass --out or set \"out\"");
  return c;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

ParamMap param_map(const Json& j) {
  if (!j.is_object()) throw ConfigError("model params must be an object");
  ParamMap p;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_number()) throw ConfigError("model param '" + k + "' must be a number");
    p[k] = v.get<double>();
  }
  return p;
}

ModelSpec resolve_model(const Json& j, const fs::path& base) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    for (const auto& b : builtin_names())
      if (b == name) return builtin_example(name);
    const fs::path file = resolve(base, name);
    if (fs::exists(file)) return model_from_json(read_json(file));
    throw ConfigError("model '" + name + "' is neither a builtin nor a readable file");
  }
  if (!j.is_object()) throw ConfigError("model must be a string or an object");
  if (j.contains("builtin")) {
    require_known_keys(j, {"builtin", "params", "trunc_radius"}, "model");
    ModelSpec ms = builtin_example(j["builtin"].get<std::string>(),
                                   j.contains("params") ? param_map(j["params"]) : ParamMap{});
    if (j.contains("trunc_radius")) ms = ms.with_trunc_radius(j["trunc_radius"].get<double>());
    return ms;
  }
  if (j.contains("file")) {
    require_known_keys(j, {"file"}, "model");
    return model_from_json(read_json(resolve(base, j["file"].get<std::string>())));
  }
  return model_from_json(j);
}

std::vector<double> number_list(const Json& j, const char* what) {
  if (!j.is_array()) throw ConfigError(std::string(what) + " must be an array of numbers");
  std::vector<double> v;
  for (const auto& e : j) {
    if (!e.is_number()) throw ConfigError(std::string(what) + " must be an array of numbers");
    v.push_back(e.get<double>());
  }
  return v;
}

/// {"type":"point","x":[..]}, {"type":"normal","mean":[..],"std":s,"n":N}
/// or {"type":"csv","path":...}. Defaults to the point mass at the origin.
ParticleCloud make_init(const Json* j, int d, std::uint64_t seed, std::size_t default_n, double t0,
                        const fs::path& base) {
  if (j == nullptr) return ParticleCloud::point_mass(std::vector<double>(static_cast<std::size_t>(d), 0.0), t0);
  if (!j->is_object() || !j->contains("type")) throw ConfigError("init must be an object with a \"type\"");
  const auto type = (*j)["type"].get<std::string>();
  if (type == "point") {
    require_known_keys(*j, {"type", "x"}, "init");
    const auto x = number_list(j->at("x"), "init.x");
    if (x.size() != static_cast<std::size_t>(d)) throw DimensionError("init.x must have d entries");
    return ParticleCloud::point_mass(x, t0);
  }
  if (type == "normal") {
    require_known_keys(*j, {"type", "mean", "std", "n"}, "init");
    std::vector<double> mean(static_cast<std::size_t>(d), 0.0);
    if (j->contains("mean")) mean = number_list((*j)["mean"], "init.mean");
    if (mean.size() != static_cast<std::size_t>(d)) throw DimensionError("init.mean must have d entries");
    if (j->contains("std") && !(*j)["std"].is_number()) throw ConfigError("init.std must be a number");
    const double sd = j->contains("std") ? (*j)["std"].get<double>() : 1.0;
    if (!(sd >= 0.0)) throw ConfigError("init.std must be nonnegative");
    std::size_t n = default_n;
    if (j->contains("n")) {
      if (!(*j)["n"].is_number_integer() || (*j)["n"].get<long long>() < 1)
        throw ConfigError("init.n must be a positive integer");
      n = (*j)["n"].get<std::size_t>();
    }
    std::vector<double> pos(n * static_cast<std::size_t>(d));
    CounterRng(derive_seed(seed, kTagInit), Stream::kInitSample).fill_normals(0, pos);
    for (std::size_t i = 0; i < n; ++i)
      for (int c = 0; c < d; ++c) {
        double& v = pos[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(c)];
        v = mean[static_cast<std::size_t>(c)] + sd * v;
      }
    return ParticleCloud::uniform(d, std::move(pos), t0);
  }
  if (type == "csv") {
    require_known_keys(*j, {"type", "path"}, "init");
    const ParticleCloud c = read_cloud_csv(resolve(base, j->at("path").get<std::string>()));
    if (c.dim() != d) throw DimensionError("init cloud dimension does not match the model");
    return c.with_time(t0);
  }
  throw ConfigError("init.type must be point, normal or csv");
}

SimConfig sim_from(const Context& c, SimConfig defaults) {
  SimConfig s = c.cfg.contains("sim") ? sim_config_from_json(c.cfg["sim"], defaults) : defaults;
  if (c.cfg.contains("seed")) s.seed = c.cfg["seed"].get<std::uint64_t>();
  if (c.opts.seed) s.seed = *c.opts.seed;
  return s;
}

const Json* find(const Json& j, const char* key) { return j.contains(key) ? &j[key] : nullptr; }

Json run_echo(const Context& c, const ModelSpec& ms, const char* command) {
  Json j;
  j["command"] = command;
  j["build"] = build_version();
  j["model"] = model_to_json(ms);
  j["config"] = c.cfg;
  if (c.opts.seed) j["seed_override"] = *c.opts.seed;
  return j;
}

void export_partial(const BlowUpError& e, const fs::path& dir, std::ostream& err) {
  if (e.partial()) {
    export_trajectory(*e.partial(), dir);
    err << "partial trajectory (" << e.partial()->snapshots.size() << " snapshots) written to " << dir.string()
        << '\n';
  }
}

int cmd_simulate(const Options& o, std::ostream& out, std::ostream& err) {
  const Log log(err, o.verbose);
  const Context c = load(o, {"model", "init", "sim", "coupled", "out", "seed"}, "simulate");
  const ModelSpec ms = resolve_model(c.cfg.at("model"), c.base);
  const SimConfig sim = sim_from(c, SimConfig{});
  sim.validate(ms.period());
  const ParticleCloud init = make_init(find(c.cfg, "init"), ms.dim(), sim.seed, sim.N, sim.t0, c.base);
  fs::create_directories(c.out);
  write_json(run_echo(c, ms, "simulate"), c.out / "run.json");
  log("simulate: N=", sim.N, " steps=", sim.step_count(), " dt=", format_double(sim.effective_dt()));
  try {
    Trajectory traj;
    if (const Json* cp = find(c.cfg, "coupled")) {
      require_known_keys(*cp, {"x0"}, "coupled");
      const auto x0 = number_list(cp->at("x0"), "coupled.x0");
      traj = simulate_coupled(ms, x0, init, sim);
    } else {
      traj = simulate_flow(ms, init, sim);
    }
    export_trajectory(traj, c.out);
    out << "simulated " << traj.n_steps << " steps, " << traj.snapshots.size() << " snapshots -> "
        << c.out.string() << '\n';
    return kExitOk;
  } catch (const BlowUpError& e) {
    err << e.what() << '\n';
    export_partial(e, c.out, err);
    return kExitBlowUp;
  }
}

CertifyConfig certify_from(const Context& c) {
  CertifyConfig cc;
  cc.sim = sim_from(c, cc.sim);
  if (const Json* j = find(c.cfg, "certify")) {
    if (j->contains("sim")) throw ConfigError("certify: simulation settings belong in the top-level 'sim' block");
    cc = certify_config_from_json(*j, cc);
  }
  return cc;
}

int cmd_certify(const Options& o, std::ostream& out, std::ostream& err) {
  const Log log(err, o.verbose);
  const Context c = load(o, {"model", "init", "sim", "certify", "period_map", "out", "seed"}, "certify");
  const ModelSpec ms = resolve_model(c.cfg.at("model"), c.base);
  const CertifyConfig cc = certify_from(c);
  cc.validate(ms.period());
  std::size_t pm_iters = 0;
  double pm_tol = 0.0;
  if (const Json* pm = find(c.cfg, "period_map")) {
    require_known_keys(*pm, {"max_iters", "tol"}, "period_map");
    pm_iters = pm->value("max_iters", std::size_t{40});
    pm_tol = pm->value("tol", cc.tol);
    if (pm_iters < 1 || !(pm_tol > 0.0)) throw ConfigError("period_map needs max_iters >= 1 and tol > 0");
  }
  const ParticleCloud init = make_init(find(c.cfg, "init"), ms.dim(), cc.sim.seed, cc.sim.N, cc.sim.t0, c.base);
  fs::create_directories(c.out);
  write_json(run_echo(c, ms, "certify"), c.out / "run.json");
  log("certify: burn_in=", cc.burn_in, " trailing=", cc.trailing, " phases=", cc.phases,
      " steps/period=", cc.steps_per_period(ms.period()));
  try {
    const Certification cert = certify_periodic(ms, init, cc);
    write_json(to_json(cert.certificate), c.out / "certificate.json");
    export_phase_set(cert.phase_set, c.out / "phases");
    if (pm_iters > 0) {
      log("period map: max_iters=", pm_iters, " tol=", format_double(pm_tol));
      const PeriodMapResult pm = period_map_iterate(ms, init, cc, pm_iters, pm_tol);
      Json j = to_json(pm.log);
      Json gap = Json::array();
      for (std::size_t k = 0; k < pm.phase_set.clouds.size(); ++k)
        gap.push_back(w2_distance(pm.phase_set.clouds[k], cert.phase_set.clouds[k], cc.n_proj).value);
      j["w2_to_certified_phases"] = gap;
      write_json(j, c.out / "period_map.json");
      export_phase_set(pm.phase_set, c.out / "period_map_phases");
    }
    out << (cert.certificate.pass ? "PASS" : "FAIL") << " max trailing W2 " << format_double(cert.certificate.max_distance)
        << " (tol " << format_double(cert.certificate.tol) << ")\n";
    return cert.certificate.pass ? kExitOk : kExitCertificationFailed;
  } catch (const BlowUpError& e) {
    err << e.what() << '\n';
    export_partial(e, c.out / "partial", err);
    return kExitBlowUp;
  }
}

int cmd_lyapunov(const Options& o, std::ostream& out, std::ostream& err) {
  const Log log(err, o.verbose);
  const Context c = load(o, {"model", "lyapunov", "radii", "scan", "trajectory", "tail_radii", "chebyshev", "out", "seed"},
                         "lyapunov");
  const ModelSpec ms = resolve_model(c.cfg.at("model"), c.base);
  const int d = ms.dim();
  std::string v0, v1;
  for (int i = 1; i <= d; ++i) {
    v0 += (i > 1 ? " + x" : "x") + std::to_string(i) + "^2";
    v1 += (i > 1 ? " + y" : "y") + std::to_string(i) + "^2";
  }
  if (const Json* l = find(c.cfg, "lyapunov")) {
    require_known_keys(*l, {"v0", "v1"}, "lyapunov");
    v0 = l->value("v0", v0);
    v1 = l->value("v1", v1);
  }
  const LyapunovSpec ls = LyapunovSpec::parse(v0, v1, ms.period(), d);
  std::vector<double> radii{1.0, 2.0, 4.0, 8.0};
  if (c.cfg.contains("radii")) radii = number_list(c.cfg["radii"], "radii");
  ScanParams sp;
  if (const Json* s = find(c.cfg, "scan")) {
    require_known_keys(*s, {"samples_per_radius", "shell_width", "cloud_points", "max_components", "component_spread"},
                       "scan");
    sp.samples_per_radius = s->value("samples_per_radius", sp.samples_per_radius);
    sp.shell_width = s->value("shell_width", sp.shell_width);
    sp.cloud_points = s->value("cloud_points", sp.cloud_points);
    sp.max_components = s->value("max_components", sp.max_components);
    sp.component_spread = s->value("component_spread", sp.component_spread);
  }
  std::uint64_t seed = c.cfg.value("seed", std::uint64_t{1});
  if (o.seed) seed = *o.seed;
  fs::create_directories(c.out);
  write_json(run_echo(c, ms, "lyapunov"), c.out / "run.json");

  log("radial scan over ", radii.size(), " radii");
  const RadialScanReport scan = radial_scan(ls, ms, radii, sp, seed);
  Json sj = to_json(scan);
  sj["v_min_on_grid"] = ls.min_on_grid();
  write_json(sj, c.out / "scan.json");
  write_scan_csv(scan, c.out / "scan.csv");
  out << "scan:";
  for (std::size_t i = 0; i < radii.size(); ++i)
    out << " R=" << format_double(radii[i]) << " A=" << format_double(scan.a_hat[i]);
  out << '\n';

  const Json* tj = find(c.cfg, "trajectory");
  if (tj == nullptr) {
    if (c.cfg.contains("chebyshev") || c.cfg.contains("tail_radii"))
      throw ConfigError("tail_radii and chebyshev need a \"trajectory\" block");
    return kExitOk;
  }
  require_known_keys(*tj, {"init", "sim"}, "trajectory");
  SimConfig sim = tj->contains("sim") ? sim_config_from_json((*tj)["sim"]) : SimConfig{};
  sim.seed = derive_seed(seed, 1);
  sim.validate(ms.period());
  const ParticleCloud init = make_init(find(*tj, "init"), d, sim.seed, sim.N, sim.t0, c.base);
  log("simulating ", sim.step_count(), " steps for tail statistics");
  Trajectory traj;
  try {
    traj = simulate_flow(ms, init, sim);
  } catch (const BlowUpError& e) {
    err << e.what() << '\n';
    export_partial(e, c.out / "partial", err);
    return kExitBlowUp;
  }
  std::vector<double> tail_radii = radii;
  if (c.cfg.contains("tail_radii")) tail_radii = number_list(c.cfg["tail_radii"], "tail_radii");
  write_json(to_json(tail_criteria(traj, tail_radii, ms.period())), c.out / "tail_criteria.json");
  if (const Json* cj = find(c.cfg, "chebyshev")) {
    require_known_keys(*cj, {"radius", "lambda"}, "chebyshev");
    const double radius = cj->at("radius").get<double>();
    const double lambda = cj->contains("lambda") ? (*cj)["lambda"].get<double>()
                                                 : scan_lambda(ls, ms, 2.0 * radius, sp, derive_seed(seed, 2));
    const ChebyshevReport rep = chebyshev_tail_bound(ls, ms, traj, lambda, radius);
    write_json(to_json(rep), c.out / "chebyshev.json");
    out << "chebyshev bound at R=" << format_double(radius) << (rep.holds ? " holds" : " violated") << '\n';
  }
  return kExitOk;
}

int cmd_sweep(const Options& o, std::ostream& out, std::ostream& err) {
  const Log log(err, o.verbose);
  const Context c = load(o, {"family", "models", "init", "sim", "certify", "out", "seed"}, "sweep");
  std::vector<ModelSpec> models;
  if (const Json* f = find(c.cfg, "family")) {
    require_known_keys(*f, {"builtin", "params", "vary", "values"}, "family");
    const auto name = f->at("builtin").get<std::string>();
    const ParamMap base = f->contains("params") ? param_map((*f)["params"]) : ParamMap{};
    const auto vary = f->at("vary").get<std::string>();
    for (double v : number_list(f->at("values"), "family.values")) {
      ParamMap p = base;
      p[vary] = v;
      models.push_back(builtin_example(name, p).with_label(name + "[" + vary + "=" + format_double(v) + "]"));
    }
  }
  if (const Json* ms = find(c.cfg, "models")) {
    if (!ms->is_array()) throw ConfigError("models must be an array");
    for (const auto& m : *ms) models.push_back(resolve_model(m, c.base));
  }
  if (models.empty()) throw ConfigError("sweep needs a \"family\" or a non-empty \"models\" list");
  const CertifyConfig cc = certify_from(c);
  for (const auto& m : models) cc.validate(m.period());
  const ParticleCloud init =
      make_init(find(c.cfg, "init"), models.front().dim(), cc.sim.seed, cc.sim.N, cc.sim.t0, c.base);
  fs::create_directories(c.out);
  Json echo;
  echo["command"] = "sweep";
  echo["build"] = build_version();
  echo["models"] = Json::array();
  for (const auto& m : models) echo["models"].push_back(model_to_json(m));
  echo["config"] = c.cfg;
  if (o.seed) echo["seed_override"] = *o.seed;
  write_json(echo, c.out / "run.json");
  log("sweep over ", models.size(), " models");
  const SweepReport rep = parameter_sweep(models, cc, init);
  Json j = to_json(rep);
  j["config"] = certify_config_to_json(cc);
  write_json(j, c.out / "sweep.json");
  for (const auto& m : rep.members)
    out << m.label << (m.certified ? " certified" : " not certified") << " max W2 " << format_double(m.max_distance)
        << '\n';
  return kExitOk;
}

int cmd_examples_list(std::ostream& out) {
  for (const auto& name : builtin_names()) {
    const ModelSpec ms = builtin_example(name);
    out << name;
    for (const auto& [k, v] : builtin_defaults(name)) out << ' ' << k << '=' << format_double(v);
    out << "\n  drift: " << ms.drift()[0].to_string() << "\n  diffusion: " << ms.diffusion()[0].to_string() << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Particle laboratory for time-periodic McKean-Vlasov equations", "mvlab"};
  app.fallthrough();
  app.require_subcommand(1);
  Options o;
  int threads = 0;
  std::uint64_t seed = 0;
  app.add_option("--threads", threads, "worker cap (results do not depend on it)")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed, "overrides every seed in the config");
  app.add_flag("-v,--verbose", o.verbose, "progress on stderr");
  app.set_version_flag("--version", std::string(build_version()));

  std::vector<CLI::App*> runs;
  const std::pair<const char*, const char*> commands[] = {
      {"simulate", "run the particle system and export snapshots"},
      {"certify", "check a candidate periodic law phase by phase"},
      {"lyapunov", "radial scan of LV, tail statistics and the Chebyshev check"},
      {"sweep", "certify a model family and report its tail profile"},
  };
  for (const auto& [name, about] : commands) {
    auto* sub = app.add_subcommand(name, about);
    sub->add_option("--config,-c", o.config, "JSON run configuration")->required();
    sub->add_option("--out,-o", o.out, "output directory");
    runs.push_back(sub);
  }
  auto* examples = app.add_subcommand("examples", "built-in models");
  examples->require_subcommand(1);
  auto* list = examples->add_subcommand("list", "print built-in models and default parameters");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << build_version() << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n' << app.help();
    return kExitConfig;
  }
  if (*seed_opt) o.seed = seed;
  apply_thread_env();
  if (threads > 0) set_thread_count(threads);

  try {
    if (list->parsed()) return cmd_examples_list(out);
    if (runs[0]->parsed()) return cmd_simulate(o, out, err);
    if (runs[1]->parsed()) return cmd_certify(o, out, err);
    if (runs[2]->parsed()) return cmd_lyapunov(o, out, err);
    if (runs[3]->parsed()) return cmd_sweep(o, out, err);
  } catch (const BlowUpError& e) {
    err << e.what() << '\n';
    return kExitBlowUp;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DimensionError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const EvalError& e) {
    err << "evaluation error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    err << "file error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace mvlab
