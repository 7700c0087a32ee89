#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace audit {

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Small counter-style generator: the stream is a pure function of the seed
// material it was keyed with, so replaying a run replays the exact draws.
class KeyedRng {
 public:
  explicit KeyedRng(std::uint64_t seed) : state_(seed) {
    // scramble once so nearby seeds diverge immediately
    splitmix64(state_);
  }
  KeyedRng(std::uint64_t seed, std::string_view key)
      : KeyedRng(seed ^ fnv1a64(key)) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // uniform in [0,1) with 53 random bits
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // standard normal via Box-Muller; two uniforms per draw, no cached spare
  double next_normal() {
    double u1 = next_double();
    double u2 = next_double();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // uniform integer in [0, n)
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t state_;
};

}  // namespace audit
