#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

namespace rwevade {

using ByteHistogram = std::array<std::uint64_t, 256>;

ByteHistogram byte_histogram(std::span<const std::uint8_t> payload);

// Shannon entropy of the byte distribution in bits, divided by 8 so the
// result lies in [0,1]. Throws std::invalid_argument("empty payload") when
// every count is zero.
double shannon_entropy(const ByteHistogram& histogram);
double shannon_entropy(std::span<const std::uint8_t> payload);

}  // namespace rwevade
