#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace mvlab {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Output is a
/// pure function of (key, counter), which is what makes particle updates
/// independent of scheduling.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

/// Independent substreams drawn under one seed.
enum class Stream : std::uint32_t {
  kEulerNoise = 1,
  kResample = 2,
  kInitSample = 3,
  kRadialScan = 4,
  kProjection = 5,
  kTest = 15,
};

/// splitmix64 finalizer; used to derive child seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) noexcept {
  return mix64(seed ^ mix64(tag + 0x632BE59BD9B4E019ull));
}

/// Addressable random numbers: every draw is identified by
/// (seed, stream, step, index) and never by call order.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, Stream stream) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(static_cast<std::uint32_t>(stream)) {}

  /// Four raw 32-bit words for block (step, index). `attempt` selects a
  /// fresh block for rejection samplers.
  Philox4x32::Counter block(std::uint64_t step, std::uint64_t index, std::uint32_t attempt = 0) const noexcept {
    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(step),
                                  static_cast<std::uint32_t>(step >> 32),
                                  (stream_ << 24) ^ (attempt << 16) ^ static_cast<std::uint32_t>(index >> 32)};
    return Philox4x32::generate(ctr, key_);
  }

  /// Two uniforms in the open interval (0,1) with 52-bit resolution.
  std::array<double, 2> uniforms(std::uint64_t step, std::uint64_t index) const noexcept {
    const auto w = block(step, index);
    return {to_unit(w[0], w[1]), to_unit(w[2], w[3])};
  }

  /// Four independent standard normals (Marsaglia polar method on 32-bit
  /// coordinates). Words (0,1) feed the first pair and (2,3) the second; a
  /// rejected pair retries with the same words of further blocks at this
  /// address.
  std::array<double, 4> normals(std::uint64_t step, std::uint64_t index) const noexcept {
    std::array<double, 4> z{};
    auto w = block(step, index);
    if (!polar(w[0], w[1], z[0], z[1]))
      for (std::uint32_t attempt = 1;; ++attempt) {
        const auto r = block(step, index, attempt);
        if (polar(r[0], r[1], z[0], z[1])) break;
      }
    if (!polar(w[2], w[3], z[2], z[3]))
      for (std::uint32_t attempt = 1;; ++attempt) {
        const auto r = block(step, index, attempt);
        if (polar(r[2], r[3], z[2], z[3])) break;
      }
    return z;
  }

  /// Fills out[L] with the L-th normal of the given step; entries 4q..4q+3
  /// come from block q, so any slicing of `out` reproduces the same values.
  void fill_normals(std::uint64_t step, std::span<double> out) const;

  /// Midpoint of one of 2^32 equal cells of (-1, 1).
  static double to_signed(std::uint32_t w) noexcept { return (static_cast<double>(w) + 0.5) * 0x1.0p-31 - 1.0; }

  static double to_unit(std::uint32_t hi, std::uint32_t lo) noexcept {
    const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 12;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-52;
  }

 private:
  static bool polar(std::uint32_t wa, std::uint32_t wb, double& za, double& zb) noexcept {
    const double a = to_signed(wa);
    const double b = to_signed(wb);
    const double s = a * a + b * b;
    if (!(s < 1.0 && s > 0.0)) return false;
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    za = a * f;
    zb = b * f;
    return true;
  }

  Philox4x32::Key key_;
  std::uint32_t stream_;
};

}  // namespace mvlab
