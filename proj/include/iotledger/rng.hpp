#pragma once

// Deterministic randomness. std::mt19937_64's output stream is pinned by the
// standard but the distribution adaptors are not, so all mappings from raw
// 64-bit draws to doubles/ranges live here.

#include <cstdint>
#include <random>

namespace iotledger {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t u64() { return eng_(); }

  // Uniform in [0, 1), 53 bits of mantissa.
  double unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  // Uniform in [0, n). Modulo bias is irrelevant at desk scale and keeps the
  // draw count per call fixed, which reproducibility relies on.
  std::uint64_t below(std::uint64_t n) { return eng_() % n; }

  bool coin() { return (eng_() & 1u) != 0; }

  std::uint8_t byte() { return static_cast<std::uint8_t>(eng_() & 0xff); }

 private:
  std::mt19937_64 eng_;
};

}  // namespace iotledger
