// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mvlab/cli.hpp"
#include "mvlab/error.hpp"
#include "mvlab/io.hpp"
#include "mvlab/lyapunov.hpp"
#include "mvlab/parallel.hpp"
#include "mvlab/periodic.hpp"
#include "mvlab/rng.hpp"
#include "mvlab/simulate.hpp"
#include "oracles.hpp"
#include "tmpdir.hpp"

using namespace mvlab;
namespace fs = std::filesystem;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Frozen from tools/calibrate_gap (10 seeds per cell, N in {1e3, 4e3, 1e4},
// dt in {4e-3, 1e-3}, margin 1.5).
constexpr double kGapC1 = 3.95;
constexpr double kGapC2 = 2.31;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

ParticleCloud delta(double x) { return ParticleCloud::point_mass(std::vector<double>{x}); }
double mom(const ParticleCloud& c, int k) { return moment(c, std::vector<int>{k}); }
LyapunovSpec quadratic() { return LyapunovSpec::parse("x1^2", "y1^2", kTwoPi, 1); }

CertifyConfig default_certify(std::uint64_t seed) {
  CertifyConfig c;  // N=5000, dt=1e-3, burn-in 20, trailing 5, m=8, tol=0.05
  c.sim.seed = seed;
  return c;
}

// ---- shared ex52 run (criteria 6, 8, 9) ----

struct Ex52Run {
  Trajectory traj;
  CertifyConfig cfg;
};

const Ex52Run& ex52_run() {
  static const Ex52Run run = [] {
    Ex52Run r;
    r.cfg = default_certify(52);
    const ModelSpec ms = builtin_example("ex52_quartic");
    const std::uint64_t per = r.cfg.steps_per_period(kTwoPi);
    SimConfig sim = r.cfg.sim;
    sim.dt = kTwoPi / static_cast<double>(per);
    sim.t1 = 30 * kTwoPi;
    sim.record_stride = per / r.cfg.phases;
    r.traj = simulate_flow(ms, delta(0.5), sim);
    return r;
  }();
  return run;
}

Outcome transport_oracle() {
  std::mt19937_64 gen(1);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(gen() % 6);
    const auto a = oracle::random_points(gen, n, -3.0, 3.0);
    const auto b = oracle::random_points(gen, n, -3.0, 3.0);
    const double cost = oracle::assignment_cost(a, b, 1, 2.0);
    const double w = wasserstein2_1d(ParticleCloud::uniform(1, a), ParticleCloud::uniform(1, b));
    worst = std::max({worst, std::abs(w * w - cost), std::abs(w - std::sqrt(cost))});
  }
  return {worst <= 1e-9, "max |delta| = " + fmt(worst)};
}

Outcome prop21() {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  double worst = -1.0;
  for (int trial = 0; trial < 100; ++trial) {
    auto draw = [&] {
      const std::size_t n = 1 + gen() % 6;
      std::vector<double> w(n);
      double s = 0;
      for (double& x : w) s += (x = u(gen));
      for (double& x : w) x /= s;
      return ParticleCloud(1, oracle::random_points(gen, n, -2.0, 2.0), w);
    };
    const auto a = draw(), b = draw();
    const double om = omega_small(a, b);
    for (int p : {1, 2}) worst = std::max(worst, std::pow(om, 1.0 + 1.0 / p) - wasserstein_1d(a, b, p));
  }
  return {worst <= 1e-9, "max (omega^(1+1/p) - W_p) = " + fmt(worst)};
}

Outcome lions() {
  std::vector<double> grid;
  for (int i = -60; i <= 60; ++i) grid.push_back(0.05 * i);
  double worst = 0.0;
  for (const char* v1 : {"y1^2", "y1^4", "y1^2 + y1^4"})
    worst = std::max(worst, check_lions_closed_form(LyapunovSpec::parse("0", v1, kTwoPi, 1), 0.4, grid).max_error);
  return {worst <= 1e-6, "max error = " + fmt(worst)};
}

Outcome ito() {
  SimConfig c;
  c.N = 10000;
  c.dt = 1e-3;
  c.t1 = kTwoPi;
  c.seed = 4;
  const auto r = ito_increment_check(quadratic(), builtin_example("ex51_ou"), delta(0.0), c);
  return {r.holds, "increment " + fmt(r.sum_increment) + " vs sum LV dt " + fmt(r.sum_generator) + ", |diff| " +
                       fmt(std::abs(r.discrepancy)) + " <= " + fmt(r.allowance)};
}

Outcome ou_orbit() {
  const ModelSpec ms = builtin_example("ex51_ou");
  const oracle::OuMoments ou;
  const std::size_t phases[] = {0, 4};
  std::vector<double> m[2], q[2];
  bool all_pass = true;
  double max_dist = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto r = certify_periodic(ms, delta(0.0), default_certify(seed));
    all_pass = all_pass && r.certificate.pass;
    max_dist = std::max(max_dist, r.certificate.max_distance);
    for (int k = 0; k < 2; ++k) {
      m[k].push_back(mom(r.phase_set.clouds[phases[k]], 1));
      q[k].push_back(mom(r.phase_set.clouds[phases[k]], 2));
    }
  }
  auto mean_se = [](const std::vector<double>& v) {
    double s = 0, s2 = 0;
    for (double x : v) s += x;
    const double mean = s / static_cast<double>(v.size());
    for (double x : v) s2 += (x - mean) * (x - mean);
    return std::pair{mean, std::sqrt(s2 / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()))};
  };
  bool ok = all_pass;
  std::string detail = "certified " + std::string(all_pass ? "5/5" : "<5/5") + " (max W2 " + fmt(max_dist) + ")";
  const double dt = 1e-3;
  for (int k = 0; k < 2; ++k) {
    const double s = kTwoPi * static_cast<double>(phases[k]) / 8.0;
    const auto [mm, mse] = mean_se(m[k]);
    const auto [qm, qse] = mean_se(q[k]);
    const double mref = ou.periodic_mean(s);
    const double qref = ou.periodic(s)[1];
    ok = ok && std::abs(mm - mref) <= 3 * mse && std::abs(qm - qref) <= 3 * qse + 1.0 * dt;
    detail += "; phase " + fmt(s) + ": mean " + fmt(mm) + " vs " + fmt(mref) + " (3SE " + fmt(3 * mse) + "), E x^2 " +
              fmt(qm) + " vs " + fmt(qref) + " (3SE+dt " + fmt(3 * qse + dt) + ")";
  }
  return {ok, detail};
}

Outcome ex52_existence() {
  const auto& run = ex52_run();
  const auto cert = certify_trajectory(run.traj, run.cfg);
  const auto pm = period_map_iterate(builtin_example("ex52_quartic"), delta(0.5), run.cfg, 60, 0.05);
  double worst = 0.0;
  for (std::size_t j = 0; j < run.cfg.phases; ++j)
    worst = std::max(worst, w2_distance(pm.phase_set.clouds[j], cert.phase_set.clouds[j]).value);
  const bool ok = cert.certificate.pass && worst <= 0.1;
  return {ok, "certificate max W2 " + fmt(cert.certificate.max_distance) + " (tol 0.05), period map " +
                  (pm.log.converged ? "converged" : "not converged") + " after " + std::to_string(pm.log.iterations) +
                  " iterations, max phase W2 to certified set " + fmt(worst)};
}

Outcome h_scan() {
  const auto r = radial_scan(quadratic(), builtin_example("ex52_quartic"), {2.0, 3.0, 4.0, 5.0}, ScanParams{}, 7);
  bool ok = r.a_hat[3] < -4000.0;
  std::string detail = "A_hat =";
  for (std::size_t i = 0; i < 4; ++i) {
    if (i > 0) ok = ok && r.a_hat[i] < r.a_hat[i - 1];
    ok = ok && r.v_hat[i] >= r.radii[i] * r.radii[i];
    detail += " " + fmt(r.a_hat[i]);
  }
  detail += "; V_hat =";
  for (double v : r.v_hat) detail += " " + fmt(v);
  return {ok, detail};
}

Outcome tails() {
  const auto& run = ex52_run();
  const auto r = tail_criteria(run.traj, {2.0, 4.0, 8.0}, kTwoPi);
  const auto& row = r.rows.back();
  return {r.periods == 30 && row.cesaro_period_average < 0.01 && row.time_average < 0.01,
          "R=8 over " + std::to_string(r.periods) + " periods: period-sampled " + fmt(row.cesaro_period_average) +
              ", time-integral " + fmt(row.time_average)};
}

Outcome chebyshev() {
  const ModelSpec ou = builtin_example("ex51_ou");
  SimConfig c;
  c.N = 5000;
  c.dt = 1e-3;
  c.t1 = 5 * kTwoPi;
  c.seed = 9;
  c.record_stride = 100;
  const auto traj = simulate_flow(ou, delta(0.0), c);
  const double lam_ou = scan_lambda(quadratic(), ou, 20.0, ScanParams{}, 91);
  const auto a = chebyshev_tail_bound(quadratic(), ou, traj, lam_ou, 10.0);

  const ModelSpec q = builtin_example("ex52_quartic");
  const double lam_q = scan_lambda(quadratic(), q, 10.0, ScanParams{}, 92);
  const auto b = chebyshev_tail_bound(quadratic(), q, ex52_run().traj, lam_q, 5.0);
  return {a.holds && b.holds, "ex51 R=10: lambda " + fmt(a.lambda) + " >= visited sup " + fmt(a.visited_sup_lv) +
                                  ", " + std::to_string(a.rows.size()) + " snapshots " + (a.holds ? "hold" : "violated") +
                                  "; ex52 R=5: lambda " + fmt(b.lambda) + " >= " + fmt(b.visited_sup_lv) + ", " +
                                  std::to_string(b.rows.size()) + " snapshots " + (b.holds ? "hold" : "violated")};
}

Outcome semigroup_gap() {
  SimConfig c;
  c.N = 10000;
  c.dt = 1e-3;
  c.seed = 10;
  const auto g = flow_semigroup_gap(builtin_example("ex51_ou"), delta(0.0), 0.0, kTwoPi / 2, kTwoPi, c);
  const double bound = kGapC1 / std::sqrt(static_cast<double>(c.N)) + kGapC2 * c.dt;
  return {g.value <= bound, "gap " + fmt(g.value) + " <= " + fmt(bound)};
}

Outcome coupled_identity() {
  bool ok = true;
  for (const char* name : {"ex51_ou", "ex52_quartic"}) {
    SimConfig c;
    c.N = 2000;
    c.dt = 1e-3;
    c.t1 = 2 * kTwoPi;
    c.seed = 11;
    c.record_stride = 50;
    const auto init = resample(ParticleCloud::uniform(1, {-0.5, 0.0, 0.25, 0.5}), c.N, 3);
    const auto traj = simulate_coupled(builtin_example(name), init, init, c);
    for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
      const auto a = traj.snapshots[k].positions();
      const auto b = traj.coupled[k].positions();
      ok = ok && std::equal(a.begin(), a.end(), b.begin(), b.end());
    }
  }
  return {ok, ok ? "X and X-bar bit-identical on ex51_ou and ex52_quartic" : "paths differ"};
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) {
      std::ifstream in(e.path(), std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      files[fs::relative(e.path(), root).string()] = ss.str();
    }
  return files;
}

Outcome determinism() {
  TempDir dir;
  const std::map<std::string, std::string> configs{
      {"simulate", R"({"model":"ex52_quartic","init":{"type":"normal","mean":[0],"std":0.5},)"
                   R"("sim":{"N":10000,"dt":0.001,"t1":1,"record_stride":250},"coupled":{"x0":[0.3]}})"},
      {"certify", R"({"model":"ex51_ou","sim":{"N":6000,"dt":0.005},"certify":{"burn_in":2,"trailing":2,"tol":0.2},)"
                  R"("period_map":{"max_iters":3,"tol":0.05}})"},
      {"lyapunov", R"({"model":"ex52_quartic","radii":[2,3],"scan":{"samples_per_radius":500},)"
                   R"("trajectory":{"init":{"type":"point","x":[0.5]},"sim":{"N":5000,"dt":0.002,"t1":6.283185307179586,)"
                   R"("record_stride":2}},"tail_radii":[2,4],"chebyshev":{"radius":5}})"},
      {"sweep", R"({"family":{"builtin":"ex51_ou","vary":"c","values":[2,1]},"sim":{"N":5000,"dt":0.01},)"
                R"("certify":{"burn_in":2,"trailing":2,"tol":0.3,"tail_radii":[10]}})"},
  };
  const int before = thread_count();
  const std::vector<int> counts{1, 2, max_thread_count()};
  bool ok = true;
  std::size_t files = 0;
  for (const auto& [cmd, text] : configs) {
    const auto cfg = dir / (cmd + ".json");
    std::ofstream(cfg) << text;
    std::vector<std::map<std::string, std::string>> trees;
    for (int n : counts) {
      const auto out = dir / (cmd + "_" + std::to_string(n) + "_" + std::to_string(trees.size()));
      std::ostringstream so, se;
      const int code = run_cli({"--threads", std::to_string(n), "--seed", "12", cmd, "-c", cfg.string(), "-o",
                                out.string()},
                               so, se);
      if (code != kExitOk) {
        set_thread_count(before);
        return {false, cmd + " exited " + std::to_string(code) + ": " + se.str()};
      }
      trees.push_back(read_tree(out));
    }
    files += trees[0].size();
    for (std::size_t i = 1; i < trees.size(); ++i) ok = ok && trees[i] == trees[0];
  }
  set_thread_count(before);
  return {ok, std::to_string(files) + " result files compared across threads {1, 2, " +
                  std::to_string(max_thread_count()) + "}"};
}

Outcome tightness() {
  std::vector<ModelSpec> models;
  for (int k : {1, 2, 4, 8}) models.push_back(builtin_example("ex51_ou", {{"c", 1.0 + 1.0 / k}}));
  models.push_back(builtin_example("ex51_ou"));  // k = infinity
  CertifyConfig cfg = default_certify(13);
  cfg.sim.dt = 2e-3;
  cfg.burn_in = 10;
  cfg.tail_radii = {10.0};
  const auto r = parameter_sweep(models, cfg, delta(0.0));
  bool certified = true;
  std::string dist;
  for (const auto& m : r.members) {
    certified = certified && m.certified;
    dist += " " + fmt(m.distance_to_last);
  }
  return {certified && r.sup_tail[0] < 0.01,
          std::string(certified ? "all members certified" : "a member failed certification") +
              ", sup_k tail mass at R=10 = " + fmt(r.sup_tail[0]) + "; W2 to c=1:" + dist};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

// Optional arguments select criteria by number; default runs all.
int main(int argc, char** argv) {
  apply_thread_env();
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  const std::vector<Criterion> criteria{
      {1, "transport oracle", 5, transport_oracle},
      {2, "W_p >= omega^(1+1/p)", 30, prop21},
      {3, "Lions closed form", 1, lions},
      {4, "generator/Ito consistency", 60, ito},
      {5, "ex51 periodic orbit oracle", 300, ou_orbit},
      {6, "ex52 periodic law", 600, ex52_existence},
      {7, "condition (H) scan", 120, h_scan},
      {8, "tail criteria", 600, tails},
      {9, "Chebyshev tail bound", 600, chebyshev},
      {10, "flow semigroup gap", 120, semigroup_gap},
      {11, "coupled degeneracy", 600, coupled_identity},
      {12, "thread determinism", 600, determinism},
      {13, "tightness sweep", 600, tightness},
  };
  std::ofstream report("acceptance_results.txt");
  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = o.pass && in_time;
    failures += pass ? 0 : 1;
    std::ostringstream line;
    line << (pass ? "PASS" : "FAIL") << "  criterion " << c.id << " (" << c.name << "): " << o.detail << " ["
         << fmt(secs) << " s" << (in_time ? "" : ", over the " + fmt(c.budget_s) + " s budget") << "]";
    std::cout << line.str() << std::endl;
    report << line.str() << '\n';
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
