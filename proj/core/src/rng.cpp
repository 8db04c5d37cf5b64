#include "rwevade/rng.hpp"

#include <algorithm>

namespace rwevade {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index);
}

double sample_beta(Rng& rng, double mean, double concentration) {
  mean = std::clamp(mean, 1e-3, 1.0 - 1e-3);
  std::gamma_distribution<double> ga(mean * concentration, 1.0);
  std::gamma_distribution<double> gb((1.0 - mean) * concentration, 1.0);
  const double a = ga(rng);
  const double b = gb(rng);
  if (a + b <= 0.0) return mean;
  return std::clamp(a / (a + b), 0.0, 1.0);
}

double sample_uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace rwevade
