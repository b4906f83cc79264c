#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace codesynth {

// 64-bit FNV-1a. Used for corpus hashing, shingle hashing and seed
// derivation; chosen because its output is identical on every platform.
inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// SplitMix64 finalizer. Full-avalanche mix used to derive child seeds and
// to scramble weakly-mixed hash values.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1E3537B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Documented seed-split function: every worker stream is derived from the
// master seed, a textual stream label and an index. Streams with distinct
// (label, index) pairs are independent for all practical purposes.
inline uint64_t seed_stream(uint64_t master, std::string_view label,
                            uint64_t index) {
  uint64_t h = splitmix64(master ^ fnv1a64(label));
  return splitmix64(h ^ (0x9E3779B97F4A7C15ull * (index + 1)));
}

// Seeded generator with portable bounded sampling. mt19937_64 produces the
// same stream everywhere; std::uniform_int_distribution does not, so bounded
// draws go through rejection sampling on the raw 64-bit output.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform on [0, n). n must be > 0.
  uint64_t below(uint64_t n) {
    const uint64_t limit = ~uint64_t{0} - (~uint64_t{0} % n);
    uint64_t v = gen_();
    while (v >= limit) v = gen_();
    return v % n;
  }

  // Uniform on [lo, hi] inclusive.
  int64_t range(int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi - lo + 1)));
  }

  // In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace codesynth
