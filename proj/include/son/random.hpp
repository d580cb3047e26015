#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace son {

/// Independent named streams derived from one 64-bit seed. A stream depends
/// only on (seed, name), so adding a consumer never shifts another's draws.
class RandomStreams {
public:
  explicit RandomStreams(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::mt19937_64 stream(std::string_view name) const {
    return std::mt19937_64(mix(seed_ ^ fnv1a(name)));
  }

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  /// splitmix64 finalizer.
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

private:
  std::uint64_t seed_;
};

/// Standard normal draw by Box–Muller on 53-bit uniforms. The standard
/// library's distributions are implementation-defined, which would break
/// byte-identical reruns across toolchains.
inline double standard_normal(std::mt19937_64 &rng) {
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  auto uniform = [&] {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
  };
  const double u1 = uniform(), u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(std::mt19937_64 &rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, bound) by rejection.
inline std::uint64_t uniform_index(std::mt19937_64 &rng, std::uint64_t bound) {
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

} // namespace son
