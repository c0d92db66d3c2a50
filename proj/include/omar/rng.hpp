#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace omar {

// Deterministic random source. All distributions are hand-rolled on top of
// mt19937_64 so that generated byte streams do not depend on the standard
// library's unspecified distribution algorithms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(mix(seed)) {}

  // Independent, reproducible stream identified by (seed, tag, a, b).
  static Rng stream(std::uint64_t seed, std::uint64_t tag, std::uint64_t a = 0,
                    std::uint64_t b = 0) {
    return Rng(mix(mix(mix(seed) ^ tag) ^ a) ^ b);
  }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n), n >= 1.
  std::int64_t uniform_int(std::int64_t n) {
    const auto un = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return static_cast<std::int64_t>(x % un);
  }

  // Standard normal via Box-Muller; second deviate cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.141592653589793238462643383279502884 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  static std::uint64_t mix(std::uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stream tags used across the code base. Each consumer owns one stream so
// that skipping an optional phase (e.g. the sampler at tau = 0) does not
// shift draws seen by the others.
namespace rng_tag {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kMinibatch = 2;
inline constexpr std::uint64_t kTargetNoise = 3;
inline constexpr std::uint64_t kOod = 4;
inline constexpr std::uint64_t kSampler = 5;
inline constexpr std::uint64_t kEval = 6;
inline constexpr std::uint64_t kEnvReset = 7;
inline constexpr std::uint64_t kExplore = 8;
inline constexpr std::uint64_t kDataGen = 9;
inline constexpr std::uint64_t kSubsample = 10;
}  // namespace rng_tag

}  // namespace omar
