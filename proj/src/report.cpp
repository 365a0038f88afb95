#include "mvlab/report.hpp"

#include <cstdio>
#include <fstream>

#include "mvlab/error.hpp"

namespace mvlab {

namespace fs = std::filesystem;

namespace {

std::size_t positive_count(const Json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(std::string(key) + " must be a nonnegative integer");
  return v.get<std::size_t>();
}

double number(const Json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number()) throw ConfigError(std::string(key) + " must be a number");
  return v.get<double>();
}

std::string phase_name(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "phase_%02zu.csv", k);
  return buf;
}

}  // namespace

Json certify_config_to_json(const CertifyConfig& cfg) {
  Json j;
  j["sim"] = sim_config_to_json(cfg.sim);
  j["burn_in"] = cfg.burn_in;
  j["trailing"] = cfg.trailing;
  j["phases"] = cfg.phases;
  j["tol"] = cfg.tol;
  j["tail_radii"] = cfg.tail_radii;
  j["n_proj"] = cfg.n_proj;
  return j;
}

CertifyConfig certify_config_from_json(const Json& j, const CertifyConfig& defaults) {
  require_known_keys(j, {"sim", "burn_in", "trailing", "phases", "tol", "tail_radii", "n_proj"}, "certify");
  CertifyConfig c = defaults;
  if (j.contains("sim")) c.sim = sim_config_from_json(j["sim"], defaults.sim);
  if (j.contains("burn_in")) c.burn_in = positive_count(j, "burn_in");
  if (j.contains("trailing")) c.trailing = positive_count(j, "trailing");
  if (j.contains("phases")) c.phases = positive_count(j, "phases");
  if (j.contains("tol")) c.tol = number(j, "tol");
  if (j.contains("n_proj")) c.n_proj = static_cast<int>(positive_count(j, "n_proj"));
  if (j.contains("tail_radii")) {
    if (!j["tail_radii"].is_array()) throw ConfigError("tail_radii must be an array");
    c.tail_radii.clear();
    for (const auto& r : j["tail_radii"]) {
      if (!r.is_number()) throw ConfigError("tail_radii entries must be numbers");
      c.tail_radii.push_back(r.get<double>());
    }
  }
  return c;
}

Json to_json(const PeriodicCertificate& c) {
  Json j;
  j["format"] = "mvlab-certificate-1";
  j["build"] = build_version();
  j["model"] = c.model_label;
  j["pass"] = c.pass;
  j["max_distance"] = c.max_distance;
  j["tol"] = c.tol;
  j["exact_distances"] = c.exact_distances;
  j["distances"] = c.distances;
  j["tail_radii"] = c.tail_radii;
  j["tail_profile"] = c.tail_profile;
  j["dt_effective"] = c.dt_effective;
  j["seed"] = c.config.sim.seed;
  j["config"] = certify_config_to_json(c.config);
  return j;
}

Json to_json(const PeriodMapLog& log) {
  Json j;
  j["iterations"] = log.iterations;
  j["converged"] = log.converged;
  j["distances"] = log.distances;
  j["best_iteration"] = log.best_iteration;
  j["returned_best"] = log.returned_best;
  return j;
}

Json to_json(const RadialScanReport& r) {
  Json j;
  j["radii"] = r.radii;
  j["a_hat"] = r.a_hat;
  j["v_hat"] = r.v_hat;
  j["seed"] = r.seed;
  j["samples_per_radius"] = r.params.samples_per_radius;
  j["shell_width"] = r.params.shell_width;
  j["cloud_points"] = r.params.cloud_points;
  j["max_components"] = r.params.max_components;
  j["component_spread"] = r.params.component_spread;
  return j;
}

Json to_json(const TailCriteriaReport& r) {
  Json j;
  j["periods"] = r.periods;
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    Json e;
    e["radius"] = row.radius;
    e["cesaro_period_average"] = row.cesaro_period_average;
    e["time_average"] = row.time_average;
    e["alpha"] = row.alpha;
    e["alpha_pairs"] = row.alpha_pairs;
    rows.push_back(e);
  }
  j["rows"] = rows;
  return j;
}

Json to_json(const ChebyshevReport& r) {
  Json j;
  j["lambda"] = r.lambda;
  j["visited_sup_lv"] = r.visited_sup_lv;
  j["radius"] = r.radius;
  j["v_hat"] = r.v_hat;
  j["initial_ev"] = r.initial_ev;
  j["holds"] = r.holds;
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    Json e;
    e["time"] = row.time;
    e["empirical"] = row.empirical;
    e["standard_error"] = row.standard_error;
    e["bound"] = row.bound;
    e["holds"] = row.holds;
    rows.push_back(e);
  }
  j["rows"] = rows;
  return j;
}

Json to_json(const ItoCheckReport& r) {
  Json j;
  j["steps"] = r.steps;
  j["sum_increment"] = r.sum_increment;
  j["sum_generator"] = r.sum_generator;
  j["discrepancy"] = r.discrepancy;
  j["standard_error"] = r.standard_error;
  j["allowance"] = r.allowance;
  j["holds"] = r.holds;
  return j;
}

Json to_json(const CesaroReport& r) {
  Json j;
  j["ladder"] = r.ladder;
  j["averages"] = r.averages;
  j["increments"] = r.increments;
  j["non_monotone"] = r.non_monotone;
  j["batch_standard_error"] = r.batch_standard_error;
  j["sup_abs_integrand"] = r.sup_abs_integrand;
  return j;
}

Json to_json(const SweepReport& r) {
  Json j;
  j["format"] = "mvlab-sweep-1";
  j["build"] = build_version();
  j["tail_radii"] = r.tail_radii;
  j["sup_tail"] = r.sup_tail;
  Json members = Json::array();
  for (const auto& m : r.members) {
    Json e;
    e["label"] = m.label;
    e["certified"] = m.certified;
    e["blew_up"] = m.blew_up;
    if (!m.failure.empty()) e["failure"] = m.failure;
    e["max_distance"] = m.max_distance;
    e["tail_profile"] = m.tail_profile;
    e["distance_to_last"] = m.distance_to_last;
    members.push_back(e);
  }
  j["members"] = members;
  return j;
}

void export_phase_set(const PhaseMeasureSet& ps, const fs::path& dir) {
  fs::create_directories(dir);
  Json files = Json::array();
  for (std::size_t k = 0; k < ps.clouds.size(); ++k) {
    const std::string name = phase_name(k);
    write_cloud_csv(ps.clouds[k], dir / name);
    files.push_back(name);
  }
  Json j;
  j["format"] = "mvlab-phases-1";
  j["build"] = build_version();
  j["period"] = ps.period;
  j["s0"] = ps.s0;
  j["phases"] = ps.phases;
  j["periods_averaged"] = ps.periods_averaged;
  j["seed"] = ps.seed;
  j["N"] = ps.N;
  j["dt"] = ps.dt;
  j["clouds"] = files;
  write_json(j, dir / "phases.json");
}

PhaseMeasureSet import_phase_set(const fs::path& dir) {
  const Json j = read_json(dir / "phases.json");
  if (j.value("format", "") != "mvlab-phases-1") throw ConfigError(dir.string() + ": unrecognised phases.json");
  PhaseMeasureSet ps;
  try {
    ps.period = j.at("period").get<double>();
    ps.s0 = j.at("s0").get<double>();
    ps.phases = j.at("phases").get<std::vector<double>>();
    ps.periods_averaged = j.at("periods_averaged").get<std::size_t>();
    ps.seed = j.at("seed").get<std::uint64_t>();
    ps.N = j.at("N").get<std::size_t>();
    ps.dt = j.at("dt").get<double>();
    for (const auto& name : j.at("clouds")) ps.clouds.push_back(read_cloud_csv(dir / name.get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(dir.string() + ": malformed phases.json (" + e.what() + ")");
  }
  if (ps.clouds.size() != ps.phases.size()) throw ConfigError(dir.string() + ": phase count mismatch");
  return ps;
}

void write_scan_csv(const RadialScanReport& r, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "radius,a_hat,v_hat\n";
  for (std::size_t i = 0; i < r.radii.size(); ++i)
    out << format_double(r.radii[i]) << ',' << format_double(r.a_hat[i]) << ',' << format_double(r.v_hat[i]) << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace mvlab
