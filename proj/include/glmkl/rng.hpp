#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace glmkl {

// Splittable counter-based generator: a stream is identified by a root seed
// plus a label path, mixed through splitmix64. Replication r of cell c can
// derive stream {seed, c, r} and get reproducible draws regardless of how
// work is scheduled across threads.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) { init(seed, {}); }
  Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream) { init(seed, stream); }

  // Derive an independent child stream from this generator's identity.
  Rng child(std::initializer_list<std::uint64_t> stream) const {
    Rng r(*this);
    for (std::uint64_t v : stream) {
      r.key_ = mix(r.key_ ^ v);
      r.seed_state(r.key_);
    }
    return r;
  }

  std::uint64_t next() {  // xoshiro256++
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; second value cached.
  double normal() {
    if (have_cache_) {
      have_cache_ = false;
      return cache_;
    }
    double u1 = 0.0;
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cache_ = r * std::sin(a);
    have_cache_ = true;
    return r * std::cos(a);
  }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Rejection to avoid modulo bias.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v = next();
    while (v >= limit) v = next();
    return v % n;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  static std::uint64_t mix(std::uint64_t z) {  // splitmix64 finalizer
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  void init(std::uint64_t seed, std::initializer_list<std::uint64_t> stream) {
    key_ = mix(seed ^ 0x6a09e667f3bcc908ULL);
    for (std::uint64_t v : stream) key_ = mix(key_ ^ v);
    seed_state(key_);
  }

  void seed_state(std::uint64_t key) {
    std::uint64_t z = key;
    for (auto& s : s_) {
      z = mix(z);
      s = z;
    }
    // All-zero state is invalid for xoshiro; the mixed key never produces it
    // in practice, but guard anyway.
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
    have_cache_ = false;
  }

  std::uint64_t s_[4];
  std::uint64_t key_;
  double cache_ = 0.0;
  bool have_cache_ = false;
};

}  // namespace glmkl
