#include "rwevade/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rwevade {

ByteHistogram byte_histogram(std::span<const std::uint8_t> payload) {
  ByteHistogram hist{};
  for (auto b : payload) ++hist[b];
  return hist;
}

double shannon_entropy(const ByteHistogram& histogram) {
  std::uint64_t total = 0;
  for (auto c : histogram) total += c;
  if (total == 0) throw std::invalid_argument("empty payload");
  const double n = static_cast<double>(total);
  double bits = 0.0;
  for (auto c : histogram) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    bits -= p * std::log2(p);
  }
  // Rounding can push a uniform histogram a hair past 8 bits.
  return std::clamp(bits / 8.0, 0.0, 1.0);
}

double shannon_entropy(std::span<const std::uint8_t> payload) {
  return shannon_entropy(byte_histogram(payload));
}

}  // namespace rwevade
