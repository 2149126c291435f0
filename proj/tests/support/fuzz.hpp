#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace stnet::testing {

// Structurally broken copy of a valid STNT file whose first tensor is named
// `first_name_len` bytes long: truncated, padded, or with a corrupted magic,
// version, count, rank or dimension field. Every variant must be rejected.
inline std::vector<std::uint8_t> corrupt_stnt(const std::vector<std::uint8_t>& good,
                                              std::size_t first_name_len, std::mt19937& rng) {
  auto bytes = good;
  const std::size_t rank_at = 12 + first_name_len;
  switch (rng() % 7) {
    case 0:
      bytes.resize(rng() % bytes.size());
      break;
    case 1:
      for (std::uint32_t n = 1 + rng() % 5; n > 0; --n) bytes.push_back(static_cast<std::uint8_t>(rng()));
      break;
    case 2:
      bytes[rng() % 4] ^= static_cast<std::uint8_t>(1 + rng() % 255);
      break;
    case 3:
      bytes[4 + rng() % 2] ^= static_cast<std::uint8_t>(1 + rng() % 255);
      break;
    case 4:
      bytes[6] ^= static_cast<std::uint8_t>(1 + rng() % 255);
      break;
    case 5:
      bytes[rank_at] ^= static_cast<std::uint8_t>(1 + rng() % 7);
      break;
    default:
      bytes[rank_at + 1 + rng() % 2] ^= static_cast<std::uint8_t>(1 + rng() % 255);
      break;
  }
  return bytes;
}

}  // namespace stnet::testing
