#pragma once

#include <cstdint>
#include <random>

namespace brwlab {

// splitmix64 finalizer; used both to condition user seeds and to derive
// independent per-replicate streams from a master seed.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stream i of a master seed.  Streams are what make parallel replication
// deterministic: replicate i always draws from derive_seed(master, i), no
// matter which worker runs it.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return mix64(master ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  std::uint64_t u64() { return engine_(); }

  double uniform01() {
    // 53-bit mantissa double in [0,1)
    return (engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double normal(double mean, double sd) {
    std::normal_distribution<double> d(mean, sd);
    return d(engine_);
  }

  long poisson(double mean) {
    std::poisson_distribution<long> d(mean);
    return d(engine_);
  }

  long uniform_int(long lo, long hi) {
    std::uniform_int_distribution<long> d(lo, hi);
    return d(engine_);
  }

  // index into a cumulative weight table (strictly increasing, last = total)
  std::size_t pick_cumulative(const double* cum, std::size_t n) {
    const double u = uniform01() * cum[n - 1];
    std::size_t lo = 0, hi = n - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (u < cum[mid]) {
        hi = mid;
      } else {
        lo = mid + 1;
      }
    }
    return lo;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace brwlab
