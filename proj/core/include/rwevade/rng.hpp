#pragma once

#include <cstdint>
#include <random>

namespace rwevade {

using Rng = std::mt19937_64;

// Independent per-item streams: the result depends only on the arguments,
// never on the order items are generated in.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0);

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
  return Rng(derive_seed(seed, stream, index));
}

// Beta(mean * concentration, (1 - mean) * concentration). mean is clamped to
// (0,1) so degenerate table entries (0.0) still produce valid draws.
double sample_beta(Rng& rng, double mean, double concentration);

double sample_uniform(Rng& rng, double lo, double hi);

}  // namespace rwevade
