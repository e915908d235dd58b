#pragma once

#include <cstdint>
#include <random>

namespace hybkit {

// SplitMix64 step; used both as a mixer for seed derivation and to warm up
// engine seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based sub-seed scheme: every parallel task derives its own seed
// from (master, stream, index), so results do not depend on worker count or
// scheduling order. Streams partition usage sites (grids, starts, particles).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                 std::uint64_t index = 0) {
  std::uint64_t s = master;
  (void)splitmix64(s);
  s ^= 0x6a09e667f3bcc909ULL + stream;
  (void)splitmix64(s);
  s ^= 0xbb67ae8584caa73bULL + index;
  return splitmix64(s);
}

// mt19937_64 with a portable uniform mapping (std::uniform_real_distribution
// is not guaranteed to produce identical streams across standard libraries).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // uniform in [0, 1)
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // uniform in [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace hybkit
