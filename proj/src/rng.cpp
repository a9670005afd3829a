#include "dlstf/rng.hpp"

#include <bit>
#include <cmath>
#include <numbers>

namespace dlstf {

std::uint64_t Rng::below(std::uint64_t n) {
  if (n <= 1) return 0;
  const int bits = std::bit_width(n - 1);
  for (;;) {
    const std::uint64_t candidate = engine_() >> (64 - bits);
    if (candidate < n) return candidate;
  }
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform01();
  while (u1 <= 0.0) u1 = uniform01();
  const double u2 = uniform01();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

}  // namespace dlstf
