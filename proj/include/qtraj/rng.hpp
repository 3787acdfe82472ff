#pragma once

#include <cstdint>
#include <random>

namespace qtraj {

// splitmix64 finalizer (Vigna's public-domain mixer).  Full-avalanche: every
// input bit affects every output bit, so consecutive indices give unrelated
// streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Per-trajectory seed derivation.  Deterministic in (base_seed, index) and
// independent of worker count or execution order.
inline std::uint64_t mix_seed(std::uint64_t base_seed, std::uint64_t index) {
  return splitmix64(base_seed ^ splitmix64(index));
}

// Wraps the engine so every consumer draws uniforms the same way.
class TrajectoryRng {
 public:
  explicit TrajectoryRng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1) with the full 53 bits of double precision.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace qtraj
