#pragma once

#include <cmath>
#include <cstdint>

namespace mfg {

// Counter-based generator: every draw is a pure function of its key, so
// simulations are bitwise reproducible regardless of thread scheduling.
// Keys follow (seed, n_players, replication, player, step, stream).
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t bits(std::uint64_t n, std::uint64_t rep, std::uint64_t player,
                     std::uint64_t step, std::uint64_t stream = 0) const {
    std::uint64_t h = seed_;
    h = mix(h ^ (0x9e3779b97f4a7c15ull + n));
    h = mix(h ^ (0xbf58476d1ce4e5b9ull + rep));
    h = mix(h ^ (0x94d049bb133111ebull + player));
    h = mix(h ^ (0xd6e8feb86659fd93ull + step));
    h = mix(h ^ (0xa0761d6478bd642full + stream));
    return h;
  }

  // Uniform in [0, 1).
  double uniform(std::uint64_t n, std::uint64_t rep, std::uint64_t player,
                 std::uint64_t step, std::uint64_t stream = 0) const {
    return static_cast<double>(bits(n, rep, player, step, stream) >> 11) *
           0x1.0p-53;
  }

  // Standard normal via Box-Muller on two keyed uniforms.
  double normal(std::uint64_t n, std::uint64_t rep, std::uint64_t player,
                std::uint64_t step, std::uint64_t stream = 0) const {
    double u1 = uniform(n, rep, player, step, 2 * stream + 101);
    double u2 = uniform(n, rep, player, step, 2 * stream + 102);
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

  std::uint64_t seed() const { return seed_; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
};

}  // namespace mfg
