#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

namespace smfrlct {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Stream splitting rule: stream k of master seed s is seeded with
// splitmix64(s ^ splitmix64(k)). Every parallel unit of work (sample chunk,
// replicate, sweep point) owns one stream, so results do not depend on how
// the work is scheduled.
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master ^ splitmix64(stream));
}

inline Rng make_stream(std::uint64_t master, std::uint64_t stream) {
  return Rng(stream_seed(master, stream));
}

// Symmetric Dirichlet(alpha) draw into out. alpha == 1 is the uniform
// distribution on the simplex.
template <class Gen>
void sample_dirichlet(Gen& rng, double alpha, std::span<double> out) {
  double total = 0.0;
  if (alpha == 1.0) {
    std::exponential_distribution<double> expo(1.0);
    for (double& x : out) total += (x = expo(rng));
  } else {
    std::gamma_distribution<double> gamma(alpha, 1.0);
    for (double& x : out) total += (x = gamma(rng));
  }
  for (double& x : out) x /= total;
}

}  // namespace smfrlct
