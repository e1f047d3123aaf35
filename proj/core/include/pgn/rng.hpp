#pragma once

#include <cstdint>
#include <vector>

namespace pgn {

// Deterministic counter-based generator (splitmix64). A single 64-bit word of
// state fully determines the stream, which keeps checkpointed runs bit-exact
// across save/restore and makes the state trivial to serialize.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  float uniform(float lo, float hi) {
    return lo + static_cast<float>(uniform()) * (hi - lo);
  }

  // Integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller. Stateless apart from the counter: both
  // uniforms are always drawn, the second output is discarded.
  float normal();

  // Fisher-Yates shuffle.
  void shuffle(std::vector<int>& v);

  std::uint64_t state() const { return state_; }
  void set_state(std::uint64_t s) { state_ = s; }

  // Derives an independent stream (for per-component seeding).
  Rng fork() { return Rng(next_u64()); }

 private:
  std::uint64_t state_;
};

}  // namespace pgn
