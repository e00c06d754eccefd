#pragma once

#include <cstdint>
#include <span>

namespace actseg {

/// xoshiro256** (Blackman & Vigna), state expanded from a 64-bit seed with
/// splitmix64. Output is defined bit-for-bit on every platform, and so are the
/// uniform/normal/gumbel conversions below (no <random> distributions).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

  void reseed(std::uint64_t seed);
  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform in the open interval (0, 1).
  double uniform_open();
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal (Box-Muller; the spare value is cached).
  double normal();
  /// Standard Gumbel: -log(-log(U)).
  double gumbel();
  /// Poisson(lambda) by inversion for small lambda, normal approx with
  /// continuity correction above 500.
  std::uint64_t poisson(double lambda);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t s_[4] = {0, 0, 0, 0};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// splitmix64 finalizer; used to derive independent child seeds.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

}  // namespace actseg
