// Calibration of the flow-semigroup gap envelope gap <= c1 / sqrt(N) + c2 dt
// on ex51_ou from delta_0 with s = 0, u = T/2, t = T.
//
// For every (N, dt) on the grid it runs `--seeds` independent gaps and
// reports the largest gap * sqrt(N). c1 is the largest such value times
// `--margin`. c2 is the largest growth of the mean gap from the finest dt to
// a coarser dt, per unit dt, times the same margin (0 when the gap does not
// grow with dt).
#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <numbers>
#include <vector>

#include "mvlab/rng.hpp"
#include "mvlab/simulate.hpp"

int main(int argc, char** argv) {
  CLI::App app{"flow-semigroup gap calibration"};
  std::vector<std::size_t> sizes{1000, 4000, 10000};
  std::vector<double> steps{4e-3, 1e-3};
  std::size_t seeds = 10;
  std::uint64_t base_seed = 1000;
  double margin = 1.5;
  app.add_option("--sizes", sizes);
  app.add_option("--dts", steps);
  app.add_option("--seeds", seeds);
  app.add_option("--base-seed", base_seed);
  app.add_option("--margin", margin);
  CLI11_PARSE(app, argc, argv);

  const double T = 2.0 * std::numbers::pi;
  const mvlab::ModelSpec ms = mvlab::builtin_example("ex51_ou");
  const auto init = mvlab::ParticleCloud::point_mass(std::vector<double>{0.0});
  double c1 = 0.0;
  std::map<std::size_t, std::map<double, double>> mean_gap;
  for (std::size_t n : sizes)
    for (double dt : steps) {
      double worst = 0.0, sum = 0.0;
      for (std::size_t k = 0; k < seeds; ++k) {
        mvlab::SimConfig c;
        c.N = n;
        c.dt = dt;
        c.seed = mvlab::derive_seed(base_seed, k);
        const double g = mvlab::flow_semigroup_gap(ms, init, 0.0, T / 2, T, c).value;
        worst = std::max(worst, g * std::sqrt(static_cast<double>(n)));
        sum += g;
      }
      mean_gap[n][dt] = sum / static_cast<double>(seeds);
      c1 = std::max(c1, worst);
      std::cout << "N=" << n << " dt=" << dt << " mean_gap=" << mean_gap[n][dt] << " max_gap_sqrtN=" << worst
                << '\n';
    }
  const double fine = *std::min_element(steps.begin(), steps.end());
  double c2 = 0.0;
  for (const auto& [n, by_dt] : mean_gap)
    for (const auto& [dt, g] : by_dt)
      if (dt > fine) c2 = std::max(c2, (g - by_dt.at(fine)) / (dt - fine));
  std::cout << "c1=" << margin * c1 << " c2=" << margin * c2 << '\n';
  return 0;
}
