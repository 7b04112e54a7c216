#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>

namespace turl {

/// Seeded generator with platform-independent derived draws.
///
/// The standard distributions are implementation-defined, so every draw here
/// is built directly from the 64-bit Mersenne Twister output. Child streams
/// are derived from the construction seed and a label, never from the
/// current engine state, so forking order does not matter.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 bits of mantissa.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }

  Rng fork(std::string_view label) const;
  Rng fork(std::string_view label, std::uint64_t index) const;

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const auto j = below(i);
      using std::swap;
      swap(first[i - 1], first[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t mix64(std::uint64_t x);

}  // namespace turl
