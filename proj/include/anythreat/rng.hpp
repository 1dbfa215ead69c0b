#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace anythreat {

/// Mixes a 64-bit state and returns the next value of the splitmix64 stream.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives a child seed from a base seed and a component label.
///
/// This is the project-wide seed splitting scheme: every component that
/// consumes randomness derives its own stream as
/// `derive_seed(parent_seed, "component/name")`, so re-running one component
/// in isolation reproduces exactly the stream it saw in a full run.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (const char c : label) {
    h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
    h *= 0x100000001b3ULL;
  }
  std::uint64_t state = base ^ h;
  splitmix64(state);
  return splitmix64(state);
}

/// Deterministic random source.
///
/// The engine is std::mt19937_64 (its bit stream is pinned by the standard)
/// and every distribution is implemented here rather than through the
/// implementation-defined <random> adaptors, so a seed produces the same
/// values on every platform and standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  /// Poisson draw by Knuth's product method, split for large means so the
  /// running product never underflows.
  std::uint64_t poisson(double mean) {
    std::uint64_t total = 0;
    while (mean > 25.0) {
      total += poisson_small(25.0);
      mean -= 25.0;
    }
    return total + poisson_small(mean);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i + 1));
      using std::swap;
      swap(v[i], v[j]);
    }
  }

 private:
  std::uint64_t poisson_small(double mean) {
    if (mean <= 0.0) return 0;
    const double limit = std::exp(-mean);
    std::uint64_t k = 0;
    double prod = 1.0;
    for (;;) {
      prod *= next_unit();
      if (prod <= limit) return k;
      ++k;
    }
  }

  std::mt19937_64 engine_;
};

/// Uniform double in [lo, hi). Works with any source exposing next_unit(),
/// which lets tests substitute a scripted source.
template <class R>
double draw_uniform(R& rng, double lo, double hi) {
  return lo + (hi - lo) * rng.next_unit();
}

/// True with probability p. Consumes exactly one unit draw.
template <class R>
bool draw_bernoulli(R& rng, double p) {
  return rng.next_unit() < p;
}

}  // namespace anythreat
