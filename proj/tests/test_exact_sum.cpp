#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "mvlab/exact_sum.hpp"
#include "oracles.hpp"

using namespace mvlab;

namespace {

double streaming(const std::vector<double>& v) {
  ExactSum s;
  for (double x : v) s.add(x);
  return s.value();
}

double destructive(std::vector<double> v) { return exact_sum_destructive(v); }

}  // namespace

TEST_CASE("cancellation") {
  const std::vector<double> v{1e100, 1.0, -1e100};
  CHECK(streaming(v) == 1.0);
  CHECK(destructive(v) == 1.0);
  const std::vector<double> w{0x1p-1074, 1.0, -1.0};
  CHECK(streaming(w) == 0x1p-1074);
  CHECK(destructive(w) == 0x1p-1074);
  CHECK(streaming({}) == 0.0);
  CHECK(destructive({}) == 0.0);
}

TEST_CASE("correct rounding against a binary128 oracle") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> mant(1.0, 2.0);
  std::uniform_int_distribution<int> ex(-20, 19);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> v(1 + rng() % 1000);
    for (double& x : v) x = std::ldexp(mant(rng), ex(rng)) * ((rng() & 1) ? 1.0 : -1.0);
    const double ref = oracle::quad_sum(v);
    CHECK(streaming(v) == ref);
    CHECK(destructive(v) == ref);
  }
}

TEST_CASE("halfway cases round to even") {
  // 1 + 2^-53 is a tie between 1 and 1 + 2^-52
  CHECK(streaming({1.0, 0x1p-53}) == 1.0);
  CHECK(destructive({1.0, 0x1p-53}) == 1.0);
  CHECK(streaming({1.0 + 0x1p-52, 0x1p-53}) == 1.0 + 0x1p-51);
  // a sticky tail breaks the tie upward
  CHECK(streaming({1.0, 0x1p-53, 0x1p-300}) == 1.0 + 0x1p-52);
  CHECK(destructive({1.0, 0x1p-53, 0x1p-300}) == 1.0 + 0x1p-52);
}

TEST_CASE("order independence over wide exponent ranges") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> mant(-1.0, 1.0);
  std::uniform_int_distribution<int> ex(-600, 600);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(2000);
    for (double& x : v) x = std::ldexp(mant(rng), ex(rng));
    const double a = streaming(v);
    std::shuffle(v.begin(), v.end(), rng);
    CHECK(streaming(v) == a);
    CHECK(destructive(v) == a);
  }
}

TEST_CASE("merge equals a single accumulator") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  ExactSum all, left, right;
  for (int i = 0; i < 5000; ++i) {
    const double x = u(rng) * std::pow(10.0, static_cast<double>(i % 17) - 8.0);
    all.add(x);
    (i % 3 ? left : right).add(x);
  }
  left.merge(right);
  CHECK(left.value() == all.value());
}

TEST_CASE("non-finite terms") {
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(streaming({1.0, inf}) == inf);
  CHECK(destructive({1.0, inf, 2.0}) == inf);
  CHECK(std::isnan(streaming({inf, -inf})));
  CHECK(std::isnan(destructive({1.0, std::nan("")})));
}

TEST_CASE("extreme magnitudes") {
  const double big = std::numeric_limits<double>::max();
  CHECK(streaming({big, -big, 1.0}) == 1.0);
  CHECK(destructive({big, -big, 1.0}) == 1.0);
  CHECK(streaming({big, big}) == std::numeric_limits<double>::infinity());
  const double tiny = std::numeric_limits<double>::denorm_min();
  CHECK(destructive({tiny, tiny, tiny}) == 3 * tiny);
}
