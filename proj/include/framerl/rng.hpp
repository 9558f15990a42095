#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace framerl {

// Deterministic, platform-independent RNG used wherever outputs must be
// byte-reproducible across compilers (splits, distractor sampling).
// std::uniform_* distributions are not portable, so bounded draws are
// implemented here.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform draw in [0, bound). bound must be > 0.
  std::uint64_t bounded(std::uint64_t bound) {
    // Rejection sampling keeps the draw unbiased and portable.
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

  // Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

// FNV-1a, used to derive per-record seeds from string ids.
inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

// In-place Fisher-Yates shuffle driven by SplitMix64.
template <typename T>
void deterministic_shuffle(std::vector<T>& items, SplitMix64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.bounded(i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace framerl
