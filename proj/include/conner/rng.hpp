#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace conner {

// Deterministic random source. All randomness in the project flows through
// this class; the raw mt19937_64 stream is pinned by the standard and the
// mappings below are hand-rolled, so the same seed yields the same values on
// every platform (std::uniform_*_distribution would not guarantee that).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // Uniform in [0, n). n must be positive. Rejection sampling over the
  // smallest covering power of two keeps the draw unbiased.
  std::size_t next_index(std::size_t n) {
    std::uint64_t mask = n - 1;
    mask |= mask >> 1;
    mask |= mask >> 2;
    mask |= mask >> 4;
    mask |= mask >> 8;
    mask |= mask >> 16;
    mask |= mask >> 32;
    for (;;) {
      std::uint64_t v = next_u64() & mask;
      if (v < n) return static_cast<std::size_t>(v);
    }
  }

  // Deterministic Fisher-Yates shuffle (std::shuffle's draw sequence is
  // implementation-defined, so we roll our own).
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = next_index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  // Derives an independent child stream from the original seed and a tag.
  // Mixing follows splitmix64.
  Rng derive(std::uint64_t tag) const {
    std::uint64_t z = seed_ + tag * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return Rng(z ^ (z >> 31));
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

}  // namespace conner
