#ifndef ADAFOCUS_RNG_HPP
#define ADAFOCUS_RNG_HPP

#include <cmath>
#include <cstdint>

namespace adafocus {

// splitmix64 step; also used to derive independent stream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic combination of a base seed with a stream id. Every module
// that needs an independent stream (per-video generation, the train/test
// split, prototype draws) derives it through this, so results are stable
// across platforms and never depend on call order elsewhere.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
  std::uint64_t a = splitmix64(s);
  std::uint64_t b = splitmix64(s);
  return a ^ (b << 1);
}

// Small fixed-algorithm generator (xoshiro256**), seeded via splitmix64.
// Implemented here rather than using <random> so that corpora and training
// runs are byte-identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& word : state_) word = splitmix64(s);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). n must be >= 1.
  int uniform_int(int n) {
    const auto wide = static_cast<unsigned __int128>(next_u64()) *
                      static_cast<unsigned __int128>(n);
    return static_cast<int>(wide >> 64);
  }

  // Uniform integer in [lo, hi] inclusive.
  int uniform_range(int lo, int hi) { return lo + uniform_int(hi - lo + 1); }

  // Standard normal via Box-Muller; generates pairs, caches the second.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = 1.0 - next_double();  // (0, 1]
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace adafocus

#endif  // ADAFOCUS_RNG_HPP
