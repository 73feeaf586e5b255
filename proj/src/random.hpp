#pragma once

#include <cstdint>
#include <random>

namespace gmlp::detail {

// 53-bit mapping of mt19937_64 output, identical on every standard library.
class Uniform {
 public:
  explicit Uniform(std::uint64_t seed) : engine_(seed) {}

  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double operator()(double lo, double hi) { return lo + (hi - lo) * unit(); }
  /// Integer in [0, n).
  std::size_t index(std::size_t n) {
    const auto i = static_cast<std::size_t>(unit() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace gmlp::detail
