#include "mvlab/rng.hpp"

#include <cstddef>

namespace mvlab {

void CounterRng::fill_normals(std::uint64_t step, std::span<double> out) const {
  const auto n = static_cast<std::int64_t>(out.size());
  const std::int64_t blocks = (n + 3) / 4;
#pragma omp parallel for schedule(static) if (blocks > 2048)
  for (std::int64_t q = 0; q < blocks; ++q) {
    const auto z = normals(step, static_cast<std::uint64_t>(q));
    const std::int64_t base = 4 * q;
    for (std::int64_t r = 0; r < 4 && base + r < n; ++r) out[static_cast<std::size_t>(base + r)] = z[r];
  }
}

}  // namespace mvlab
