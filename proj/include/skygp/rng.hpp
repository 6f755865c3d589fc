#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>

namespace skygp {

// Deterministic random source for the whole project. Every draw is derived
// from raw engine output (no cached distribution state), so serializing the
// engine alone captures the full generator state for bit-exact resume.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 1) : engine_(seed) {}

  // uniform on (0,1); never returns an endpoint
  double u01() {
    const std::uint64_t bits = engine_() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

  // Box-Muller without the spare value, so no hidden state survives a call
  double normal() {
    const double r = std::sqrt(-2.0 * std::log(u01()));
    return r * std::cos(2.0 * kPi * u01());
  }

  double exponential(double rate = 1.0) { return -std::log(u01()) / rate; }

  std::uint64_t next_u64() { return engine_(); }

  // integer in [0, n), unbiased
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  void save(std::ostream& os) const { os << engine_; }
  void load(std::istream& is) { is >> engine_; }

 private:
  static constexpr double kPi = 3.14159265358979323846;
  std::mt19937_64 engine_;
};

// SplitMix64; derives independent seeds for chains and simulation replicates
// from one base seed: seed_i = split_seed(base, i).
inline std::uint64_t split_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + (index + 1) * 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace skygp
