#pragma once

#include <cstdint>
#include <random>

namespace nsflows {

/// Generator used throughout. Each flow, replicate, or worker owns its own.
using Rng = std::mt19937_64;

/// splitmix64 finaliser. Used to derive independent child seeds from a
/// master seed so that any task can be replayed in isolation.
[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30U)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27U)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31U);
}

/// Child seed for `stream` under `master`. Chaining calls builds a seed tree:
/// derive_seed(derive_seed(master, n), replicate).
[[nodiscard]] constexpr std::uint64_t derive_seed(std::uint64_t master,
                                                  std::uint64_t stream) noexcept {
  return splitmix64(splitmix64(master) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

[[nodiscard]] inline Rng make_rng(std::uint64_t seed) { return Rng{seed}; }

/// Beta(a, b) via two gamma draws.
[[nodiscard]] inline double sample_beta(double a, double b, Rng& rng) {
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  if (x + y == 0.0) {
    // Both gammas underflowed (tiny shape parameters); split by the mean.
    return a / (a + b);
  }
  return x / (x + y);
}

}  // namespace nsflows
