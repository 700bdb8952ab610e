#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace noisyq {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Deterministic random stream. A master seed plus a purpose name derives an
/// independent substream, so e.g. replay sampling never perturbs environment
/// seeds across experiment variants. Distributions are implemented by hand;
/// std:: distribution objects are not portable across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(detail::splitmix64(seed)) {}

  Rng(std::uint64_t master, std::string_view purpose)
      : Rng(detail::splitmix64(master ^ detail::fnv1a64(purpose))) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased uniform integer in [0, n).
  int uniform_int(int n) {
    auto un = static_cast<std::uint64_t>(n);
    std::uint64_t reject_below = (0ULL - un) % un;  // 2^64 mod n
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x < reject_below);
    return static_cast<int>(x % un);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double t = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Seed for a named substream, for handing to components that own their Rng.
inline std::uint64_t substream_seed(std::uint64_t master, std::string_view purpose) {
  return detail::splitmix64(master ^ detail::fnv1a64(purpose));
}

}  // namespace noisyq
