#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace dlstf {

/// Seeded PRNG whose output sequence is fixed across compilers and platforms.
///
/// The engine is std::mt19937_64, whose sequence the standard pins. The
/// standard distributions are not pinned, so every conversion below is
/// spelled out:
///   uniform01  top 53 bits of one draw scaled by 2^-53, in [0, 1)
///   below(n)   rejection sampling on the top bits, unbiased
///   normal     Box-Muller on two uniform01 draws, second value cached
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  std::uint64_t below(std::uint64_t n);

  double normal();

  /// Fisher-Yates, walking from the back.
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dlstf
