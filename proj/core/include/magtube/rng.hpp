// Deterministic pseudo-random stream. Solver starting vectors and sampled
// property tests go through this generator so that repeated runs are
// bit-identical on every platform; the standard <random> distributions do
// not pin their output across library implementations.
#pragma once

#include <cmath>
#include <cstdint>

namespace magtube {

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller; uses two uniforms per call
  double gaussian() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // independent substream derived from this stream's seed and a stream id
  SplitMix64 fork(std::uint64_t stream) const {
    SplitMix64 g(state_ ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
    g.next_u64();
    return g;
  }

 private:
  std::uint64_t state_;
};

}  // namespace magtube
