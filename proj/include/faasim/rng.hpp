#pragma once

#include <cmath>
#include <cstdint>

namespace faasim {

// splitmix64 step. Also used to derive stream seeds, so that sub-generators
// (per location, per trace) are decorrelated but fully determined by the run
// seed. Standard-library distributions are implementation-defined, which
// would break byte-identical output across toolchains, so everything random
// in the simulator goes through this generator.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic combination of a base seed and a stream tag.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t s = base ^ (0x9e3779b97f4a7c15ULL + (stream << 6) + (stream >> 2));
  // Two extra scrambles so nearby (base, stream) pairs diverge.
  (void)splitmix64(s);
  return splitmix64(s);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in [0,1), using the top 53 bits so every value is exact.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [lo, hi], inclusive. Rejection-free modulo is fine
  // here: ranges are tiny compared to 2^64, the bias is ~range/2^64.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi <= lo) return lo;
    std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(next_u64() % span);
  }

  // Knuth's product method; adequate for the per-minute rates we draw
  // (lambda stays well under a few hundred, where exp(-lambda) is normal).
  int poisson(double lambda) {
    if (!(lambda > 0.0)) return 0;
    const double limit = std::exp(-lambda);
    double p = 1.0;
    int k = 0;
    do {
      ++k;
      p *= uniform01();
    } while (p > limit);
    return k - 1;
  }

  // Independent generator for a named sub-stream, derived from the current
  // state without advancing it.
  Rng fork(std::uint64_t stream) const { return Rng(mix_seed(state_, stream)); }

 private:
  std::uint64_t state_;
};

} // namespace faasim
