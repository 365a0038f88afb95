#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "mvlab/error.hpp"
#include "mvlab/measure.hpp"
#include "mvlab/parallel.hpp"
#include "oracles.hpp"

using namespace mvlab;

namespace {

ParticleCloud u1(std::vector<double> xs) { return ParticleCloud::uniform(1, std::move(xs)); }
ParticleCloud delta(double x) { return ParticleCloud::point_mass(std::vector<double>{x}); }

ParticleCloud random_weighted(std::mt19937_64& rng, std::size_t n, double spread) {
  std::uniform_real_distribution<double> u(-spread, spread);
  std::uniform_real_distribution<double> w(0.05, 1.0);
  std::vector<double> pos(n), wt(n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    pos[i] = std::round(u(rng) * 4.0) / 4.0;  // shared atoms happen
    wt[i] = w(rng);
    s += wt[i];
  }
  for (double& v : wt) v /= s;
  // renormalise exactly enough for the 1e-12 check
  double t = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) t += wt[i];
  wt[n - 1] = 1.0 - t;
  return ParticleCloud(1, pos, wt);
}

}  // namespace

TEST_CASE("cloud validation") {
  CHECK_THROWS_AS(ParticleCloud(1, {}, {}), ConfigError);
  CHECK_THROWS_AS(ParticleCloud(1, {1.0, 2.0}, {0.5, 0.4}), ConfigError);
  CHECK_THROWS_AS(ParticleCloud(1, {1.0, 2.0}, {1.5, -0.5}), ConfigError);
  CHECK_THROWS_AS(ParticleCloud(1, {1.0, std::nan("")}, {0.5, 0.5}), ConfigError);
  CHECK_THROWS_AS(ParticleCloud(2, {1.0, 2.0, 3.0}, {0.5, 0.5}), DimensionError);
  const auto m = ParticleCloud::mixture(u1({0.0, 1.0}), delta(5.0), 0.25);
  CHECK(m.size() == 3);
  CHECK(m.weight(0) == 0.125);
  CHECK(m.weight(2) == 0.75);
}

TEST_CASE("moments") {
  CHECK(moment(delta(3.0), std::vector<int>{2}) == 9.0);
  CHECK(moment(u1({-1.0, 1.0}), std::vector<int>{1}) == 0.0);
  CHECK(moment(u1({0.5, 1.5, 2.5}), std::vector<int>{2}) == doctest::Approx(8.75 / 3).epsilon(1e-15));
  CHECK(second_moment_norm(delta(0.0)) == 0.0);
  CHECK(second_moment_norm(delta(-4.0)) == 4.0);
  CHECK(second_moment_norm(ParticleCloud::point_mass(std::vector<double>{3.0, 4.0})) == 5.0);
  CHECK(second_moment_norm(u1({0.5, 1.5, 2.5})) == doctest::Approx(std::sqrt(8.75 / 3)).epsilon(1e-15));
  CHECK_THROWS_AS(moment(delta(1.0), std::vector<int>{9}), ConfigError);
  CHECK_THROWS_AS(moment(delta(1.0), std::vector<int>{1, 1}), DimensionError);

  std::mt19937_64 rng(2);
  const auto pos = oracle::random_points(rng, 3 * 40000, -3, 3);
  const auto mu = ParticleCloud::uniform(3, pos);
  const std::vector<std::vector<int>> alphas{{1, 0, 0}, {0, 2, 1}, {2, 2, 0}, {0, 0, 4}};
  const int before = thread_count();
  set_thread_count(1);
  const auto a = moments(mu.positions(), mu.weights(), 3, alphas);
  set_thread_count(max_thread_count());
  const auto b = moments(mu.positions(), mu.weights(), 3, alphas);
  set_thread_count(before);
  CHECK(a == b);
  for (std::size_t j = 0; j < alphas.size(); ++j) CHECK(a[j] == moment(mu, alphas[j]));
}

TEST_CASE("exact 1-D W2 examples") {
  CHECK(wasserstein2_1d(delta(0.0), delta(3.0)) == 3.0);
  CHECK(wasserstein2_1d(u1({0.2, 5.0, -1.0}), u1({5.0, -1.0, 0.2})) == 0.0);
  CHECK(wasserstein2_1d(u1({0.0, 2.0}), u1({1.0, 3.0})) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(oracle::wp_uniform({0.0, 2.0}, {1.0, 3.0}, 1, 2.0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(wasserstein2_1d(ParticleCloud::point_mass(std::vector<double>{0.0, 0.0}),
                                  ParticleCloud::point_mass(std::vector<double>{1.0, 0.0})),
                  DimensionError);
}

TEST_CASE("W2 equals exhaustive assignment on uniform clouds") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng() % 6;
    const auto a = oracle::random_points(rng, n, -5, 5);
    const auto b = oracle::random_points(rng, n, -5, 5);
    for (double p : {1.0, 2.0, 3.0})
      CHECK(wasserstein_1d(u1(a), u1(b), p) == doctest::Approx(oracle::wp_uniform(a, b, 1, p)).epsilon(1e-12).scale(1e-3));
  }
}

TEST_CASE("W2 equals the unit-mass expansion on rational weights") {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 150; ++trial) {
    const int K = 2 + static_cast<int>(rng() % 6);  // total mass in units of 1/K
    auto split = [&](std::vector<double>& xs, std::vector<int>& cs) {
      int left = K;
      while (left > 0) {
        const int c = 1 + static_cast<int>(rng() % static_cast<unsigned>(left));
        xs.push_back(std::uniform_real_distribution<double>(-4, 4)(rng));
        cs.push_back(c);
        left -= c;
      }
    };
    std::vector<double> xa, xb;
    std::vector<int> ca, cb;
    split(xa, ca);
    split(xb, cb);
    auto cloud = [&](const std::vector<double>& xs, const std::vector<int>& cs) {
      std::vector<double> w;
      for (int c : cs) w.push_back(static_cast<double>(c) / K);
      return ParticleCloud(1, xs, w);
    };
    for (double p : {1.0, 2.0})
      CHECK(wasserstein_1d(cloud(xa, ca), cloud(xb, cb), p) ==
            doctest::Approx(oracle::wp_rational(xa, ca, xb, cb, p)).epsilon(1e-9).scale(1e-3));
  }
}

TEST_CASE("metric axioms") {
  std::mt19937_64 rng(47);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_weighted(rng, 1 + rng() % 8, 3.0);
    const auto b = random_weighted(rng, 1 + rng() % 8, 3.0);
    const auto c = random_weighted(rng, 1 + rng() % 8, 3.0);
    const double ab = wasserstein2_1d(a, b), ba = wasserstein2_1d(b, a);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-12).scale(1e-9));
    CHECK(ab >= 0.0);
    CHECK(wasserstein2_1d(a, a) == 0.0);
    CHECK(ab <= wasserstein2_1d(a, c) + wasserstein2_1d(c, b) + 1e-9);
  }
  // zero only for equal measures: same atoms split differently
  const ParticleCloud x(1, {1.0, 1.0, 2.0}, {0.25, 0.25, 0.5});
  const ParticleCloud y(1, {2.0, 1.0}, {0.5, 0.5});
  CHECK(wasserstein2_1d(x, y) == 0.0);
  CHECK(wasserstein2_1d(x, u1({1.0, 2.001})) > 0.0);
}

TEST_CASE("sliced W2") {
  std::mt19937_64 rng(53);
  const auto a = oracle::random_points(rng, 8, -2, 2);
  const auto mu = ParticleCloud::uniform(2, a);
  CHECK(sliced_wasserstein2(mu, mu, 32, 1) == 0.0);
  std::vector<double> shifted = a;
  for (std::size_t i = 0; i < 4; ++i) {
    shifted[2 * i] += 0.3;
    shifted[2 * i + 1] -= 0.4;
  }
  const double s = sliced_wasserstein2(mu, ParticleCloud::uniform(2, shifted), 64, 1);
  CHECK(s > 0.0);
  CHECK(s <= 0.5 + 1e-12);
  CHECK(sliced_wasserstein2(mu, ParticleCloud::uniform(2, shifted), 64, 1) == s);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = oracle::random_points(rng, 8, -2, 2);
    const auto q = oracle::random_points(rng, 8, -2, 2);
    const double exact = oracle::wp_uniform(p, q, 2, 2.0);
    CHECK(sliced_wasserstein2(ParticleCloud::uniform(2, p), ParticleCloud::uniform(2, q), 64, trial) <= exact + 1e-12);
  }
  CHECK_THROWS_AS(sliced_wasserstein2(u1({0.0}), u1({1.0}), 8, 1), DimensionError);
  const auto w = w2_distance(mu, ParticleCloud::uniform(2, shifted));
  CHECK_FALSE(w.exact);
  CHECK(w2_distance(u1({0.0}), u1({2.0})).exact);
}

TEST_CASE("Levy-Prohorov") {
  CHECK(levy_prohorov_upper(u1({1.0, 2.0}), u1({1.0, 2.0}), 2).value == 0.0);
  CHECK(levy_prohorov_upper(delta(0.0), delta(3.0), 2).value == doctest::Approx(std::pow(3.0, 2.0 / 3.0)));
  CHECK(omega_small(u1({1.0, 2.0}), u1({2.0, 1.0})) == 0.0);
  CHECK(omega_small(delta(0.0), delta(3.0)) == doctest::Approx(1.0).epsilon(1e-9));
  const ParticleCloud mix(1, {0.0, 3.0}, {0.9, 0.1});
  CHECK(omega_small(mix, delta(0.0)) == doctest::Approx(0.1).epsilon(1e-9));
  std::vector<double> big(13);
  for (std::size_t i = 0; i < big.size(); ++i) big[i] = static_cast<double>(i);
  CHECK_THROWS_AS(omega_small(u1(big), delta(0.5)), ConfigError);

  std::mt19937_64 rng(59);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = random_weighted(rng, 1 + rng() % 6, 2.0);
    const auto b = random_weighted(rng, 1 + rng() % 6, 2.0);
    const double om = omega_small(a, b);
    for (int p : {1, 2}) {
      CHECK(std::pow(om, 1.0 + 1.0 / p) <= wasserstein_1d(a, b, p) + 1e-9);
      CHECK(levy_prohorov_upper(a, b, p).value + 1e-9 >= om);
    }
  }
}

TEST_CASE("tails") {
  const auto mu = u1({0.5, 1.5, 2.5});
  CHECK(tail_mass(mu, 2.0) == doctest::Approx(1.0 / 3));
  CHECK(tail_mass(mu, 1e9) == 0.0);
  CHECK(tail_mass(mu, 2.5) == 0.0);
  CHECK(lifted_in_tail(LiftedPoint({0.0}, mu), 1.0));
  CHECK_FALSE(lifted_in_tail(LiftedPoint({0.0}, mu), 2.0));
  CHECK(lifted_in_tail(LiftedPoint({2.1}, mu), 2.0));

  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 50; ++trial) {
    const auto c = random_weighted(rng, 20, 5.0);
    const LiftedPoint lp({std::uniform_real_distribution<double>(-5, 5)(rng)}, c);
    double prev = 2.0;
    bool prev_in = true;
    for (double r = 0.25; r < 6.0; r += 0.25) {
      const double t = tail_mass(c, r);
      CHECK(t <= prev);
      prev = t;
      const bool in = lifted_in_tail(lp, r);
      CHECK((prev_in || !in));
      prev_in = in;
    }
  }
}

TEST_CASE("uniformly bounded fourth moments force vanishing tail second moments") {
  // Gaussian location mixtures with means in [-2, 2] and unit spread
  std::mt19937_64 rng(67);
  std::normal_distribution<double> g;
  std::vector<ParticleCloud> family;
  for (int k = 0; k < 30; ++k) {
    const double shift = -2.0 + 4.0 * k / 29.0;
    std::vector<double> pos(4000);
    for (double& v : pos) v = shift + g(rng);
    family.push_back(u1(pos));
  }
  double m4 = 0.0;
  for (const auto& c : family) m4 = std::max(m4, moment(c, std::vector<int>{4}));
  double prev = 1e300;
  for (double r : {1.0, 2.0, 4.0, 8.0, 16.0}) {
    double sup = 0.0;
    for (const auto& c : family) sup = std::max(sup, tail_second_moment(c, r));
    CHECK(sup <= m4 / (r * r) + 1e-12);
    CHECK(sup <= prev);
    prev = sup;
  }
  CHECK(prev == 0.0);
}
