#pragma once

#include "minimax/types.hpp"

#include <cstdint>

namespace minimax {

// Counter-based random numbers.
//
// The raw 64-bit value at counter c in the stream keyed by k is
//   fin64(k + (c + 1) * kGolden)
// where fin64 is the splitmix64 finalizer. Random access by counter is what
// makes draws parallelizable and reproducible: draw s of any sampled object
// uses the stream keyed by mix(seed, s), so partitioning work over threads
// cannot change the values produced.
namespace rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// splitmix64 finalizer
inline std::uint64_t fin64(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Stream derivation. Two finalizer rounds decorrelate consecutive indices
// from consecutive seeds; all derived streams in the project come from here.
inline std::uint64_t mix(std::uint64_t seed, std::uint64_t index) {
  return fin64(fin64(seed + kGolden) ^ (index + 0xD1B54A32D192ED03ull));
}

class CounterStream {
 public:
  explicit CounterStream(std::uint64_t key) : key_(key) {}

  std::uint64_t raw(std::uint64_t counter) const {
    return fin64(key_ + (counter + 1) * kGolden);
  }

  // Uniform strictly inside (0,1): 53-bit mantissa, half-step offset keeps
  // the endpoints out so the normal inverse CDF below is always finite.
  double uniform(std::uint64_t counter) const {
    return (static_cast<double>(raw(counter) >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal(std::uint64_t counter) const;

 private:
  std::uint64_t key_;
};

// Inverse standard normal CDF (Wichura's rational approximations, accurate to
// full double precision on (0,1)).
double inverse_normal_cdf(double p);

}  // namespace rng

// n iid standard normals from the stream keyed by `key`, counters 0..n-1.
Vector standard_normal_vector(std::uint64_t key, Index n);

}  // namespace minimax
