// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>

namespace transdot {

using u128 = unsigned __int128;
using i128 = __int128;

inline constexpr u128 low_mask(int bits) {
  return bits >= 128 ? ~u128{0} : (u128{1} << bits) - 1;
}

/// Number of significant bits; 0 for 0.
inline constexpr int bit_length(u128 v) {
  const auto hi = static_cast<std::uint64_t>(v >> 64);
  if (hi != 0) return 128 - std::countl_zero(hi);
  return 64 - std::countl_zero(static_cast<std::uint64_t>(v));
}

inline constexpr u128 magnitude(i128 v) {
  return v < 0 ? u128{0} - static_cast<u128>(v) : static_cast<u128>(v);
}

}  // namespace transdot
