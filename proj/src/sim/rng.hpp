#pragma once

#include <cstdint>
#include <random>

namespace sim {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// mt19937_64 with a portable uniform draw. One stream per (seed, stream id),
/// so adding a stream never perturbs the draws of an existing one.
class Rng {
 public:
  Rng(std::uint64_t master_seed, std::uint64_t stream)
      : engine_(splitmix64(master_seed ^ splitmix64(stream + 1))) {}

  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace sim
