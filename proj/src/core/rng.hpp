#pragma once
#include <cmath>
#include <cstdint>
#include <random>

namespace gqr {

// Deterministic RNG with explicit transforms so streams reproduce bit-for-bit
// across platforms and standard-library implementations (std distributions are
// implementation-defined; these transforms are not).
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(mix_seed(seed)) {}

  // Mixed child seed; Rng(derive_seed(m, a, b)) == substream(m, a, b). Exposed
  // so components that take a seed value (rather than an Rng) can join the
  // same substream tree.
  static uint64_t derive_seed(uint64_t master, uint64_t a, uint64_t b = 0) {
    uint64_t s = master;
    s = splitmix(s ^ (0x9E3779B97F4A7C15ULL * (a + 1)));
    s = splitmix(s ^ (0xBF58476D1CE4E5B9ULL * (b + 1)));
    return s;
  }

  // Independent child stream derived purely from (master, a, b). Parallel
  // consumers index substreams instead of sharing state, so results do not
  // depend on scheduling or worker count.
  static Rng substream(uint64_t master, uint64_t a, uint64_t b = 0) {
    return Rng(derive_seed(master, a, b));
  }

  // [0, 1)
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // Box-Muller with the companion variate cached.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925287 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  int bernoulli(double prob) { return uniform01() < prob ? 1 : 0; }

 private:
  static uint64_t splitmix(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }
  static uint64_t mix_seed(uint64_t s) { return splitmix(s ^ 0xD1B54A32D192ED03ULL); }

  std::mt19937_64 eng_;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace gqr
