#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace onnpic {

// splitmix64 step; used to derive independent sub-streams from one seed.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Deterministic RNG. mt19937_64 has a standard-mandated output sequence; the
// distributions are hand-rolled because std::*_distribution algorithms are
// implementation-defined and would break the same-seed-same-bits contract.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [lo, hi] inclusive, rejection sampled (no modulo bias).
  int64_t uniform_int(int64_t lo, int64_t hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t v;
    do {
      v = gen_();
    } while (v >= limit);
    return lo + static_cast<int64_t>(v % span);
  }

  bool coin() { return (gen_() & 1) != 0; }

  // Standard normal via Box-Muller; the spare value is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform01();  // (0, 1]
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double t = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  double normal(double mu, double sigma) { return mu + sigma * normal(); }

  // Independent derived stream (per step, per image, ...).
  Rng fork(uint64_t stream) {
    return Rng(mix_seed(gen_(), stream));
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace onnpic
