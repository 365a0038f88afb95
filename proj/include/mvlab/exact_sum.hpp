#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>

namespace mvlab {

/// Correctly rounded floating-point summation. Every finite double is an
/// integer multiple of 2^-1074, so the running total is kept exactly as a
/// fixed-point integer in 32-bit limbs; the result is that integer rounded
/// once. Addition order therefore never changes the result.
class ExactSum {
 public:
  void add(double x) noexcept {
    const auto bits = std::bit_cast<std::uint64_t>(x);
    const auto biased = static_cast<int>((bits >> 52) & 0x7ff);
    if (biased == 0x7ff) {
      special_ += x;
      return;
    }
    std::uint64_t mant = bits & ((std::uint64_t{1} << 52) - 1);
    int offset = 0;  // bit position of the mantissa's least significant bit
    if (biased == 0) {
      if (mant == 0) return;
    } else {
      mant |= std::uint64_t{1} << 52;
      offset = biased - 1;
    }
    const unsigned __int128 v = static_cast<unsigned __int128>(mant) << (offset & 31);
    const int idx = offset >> 5;
    const auto lo = static_cast<std::int64_t>(static_cast<std::uint64_t>(v) & 0xffffffffu);
    const auto mid = static_cast<std::int64_t>(static_cast<std::uint64_t>(v >> 32) & 0xffffffffu);
    const auto hi = static_cast<std::int64_t>(static_cast<std::uint64_t>(v >> 64));
    if (bits >> 63) {
      limbs_[idx] -= lo;
      limbs_[idx + 1] -= mid;
      limbs_[idx + 2] -= hi;
    } else {
      limbs_[idx] += lo;
      limbs_[idx + 1] += mid;
      limbs_[idx + 2] += hi;
    }
    if (++pending_ == kNormalizeEvery) normalize();
  }

  ExactSum& operator+=(double x) noexcept {
    add(x);
    return *this;
  }

  /// Exact, so merge order does not matter either.
  void merge(const ExactSum& other) noexcept {
    ExactSum o = other;
    o.normalize();
    normalize();
    for (std::size_t i = 0; i < kLimbs; ++i) limbs_[i] += o.limbs_[i];
    pending_ = 2;
    special_ += other.special_;
  }

  double value() const noexcept {
    if (special_ != 0.0 || std::isnan(special_)) return special_;
    ExactSum c = *this;
    c.normalize();
    bool negative = c.limbs_[kLimbs - 1] < 0;
    if (negative) {
      for (auto& l : c.limbs_) l = -l;
      c.normalize();
    }
    int h = static_cast<int>(kLimbs) - 1;
    while (h >= 0 && c.limbs_[h] == 0) --h;
    if (h < 0) return 0.0;
    const int base = h >= 2 ? h - 2 : 0;
    unsigned __int128 acc = 0;
    for (int i = h; i >= base; --i) acc = (acc << 32) | static_cast<std::uint64_t>(c.limbs_[i]);
    bool sticky = false;
    for (int i = base - 1; i >= 0 && !sticky; --i) sticky = c.limbs_[i] != 0;
    // acc carries at least 65 significant bits here, so a sticky low bit
    // only breaks ties the way the discarded limbs would
    if (sticky) acc |= 1;
    const double r = std::ldexp(static_cast<double>(acc), 32 * base - 1074);
    return negative ? -r : r;
  }

 private:
  static constexpr std::size_t kLimbs = 70;
  static constexpr std::uint32_t kNormalizeEvery = 1u << 30;

  void normalize() noexcept {
    for (std::size_t i = 0; i + 1 < kLimbs; ++i) {
      const std::int64_t carry = limbs_[i] >> 32;  // floor division
      limbs_[i] -= carry * (std::int64_t{1} << 32);
      limbs_[i + 1] += carry;
    }
    pending_ = 0;
  }

  std::array<std::int64_t, kLimbs> limbs_{};
  std::uint32_t pending_ = 0;
  double special_ = 0.0;
};

/// Exact sum that overwrites `p`. Repeatedly splits every term at a common
/// power of two sigma (error-free: q = (sigma + p) - sigma, p -= q); the
/// split-off parts are multiples of ulp(sigma)/2 bounded by sigma, so their
/// sum is exact in any order. Levels continue until nothing is left, and the
/// few level sums are combined exactly. Much faster than ExactSum::add for
/// long vectors.
inline double exact_sum_destructive(std::span<double> p) noexcept {
  const std::size_t n = p.size();
  ExactSum levels;
  const int M = static_cast<int>(std::bit_width(n + 2));
  for (;;) {
    double mx = 0.0;
    bool finite = true;
    for (double x : p) {
      finite = finite && std::isfinite(x);
      mx = std::max(mx, std::abs(x));
    }
    if (!finite || mx > 0x1p900 || (mx > 0.0 && mx < 0x1p-900)) {
      for (double x : p) levels.add(x);
      break;
    }
    if (mx == 0.0) break;
    int e = 0;
    std::frexp(mx, &e);
    const double sigma = std::ldexp(1.0, e + M);
    double tau = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double q = (sigma + p[i]) - sigma;
      p[i] -= q;
      tau += q;
    }
    levels.add(tau);
  }
  return levels.value();
}

inline double exact_sum(std::span<const double> xs) noexcept {
  ExactSum s;
  for (double x : xs) s.add(x);
  return s.value();
}

}  // namespace mvlab
