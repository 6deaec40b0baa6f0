#pragma once

#include <cstdint>

namespace ihb {

// splitmix64 finalizer. Used as the keyed mixing function inside the
// destination permutation and as the engine behind Rng.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Deterministic PRNG with an explicitly pinned algorithm. std::
// distributions are not bit-stable across standard libraries, and traces
// must be byte-identical for a given seed, so all random draws in the
// toolkit go through this.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  uint32_t next_u32() { return static_cast<uint32_t>(next_u64() >> 32); }

  // Unbiased draw in [0, bound) by rejection.
  uint64_t next_below(uint64_t bound) {
    if (bound < 2) return 0;
    const uint64_t limit = bound * (~uint64_t{0} / bound);
    uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % bound;
  }

  // Uniform double in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  bool next_bool(double p_true) { return next_double() < p_true; }

  // Independent child stream; stable under reordering of other draws.
  Rng fork(uint64_t label) const { return Rng(mix64(state_ ^ mix64(label))); }

 private:
  uint64_t state_;
};

}  // namespace ihb
