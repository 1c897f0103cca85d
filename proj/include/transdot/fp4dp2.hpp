// SPDX-License-Identifier: Apache-2.0
//
// FP4 (E2M1) two-term dot-product stage. Each pair of products is summed in
// sign-magnitude form on one fixed grid: the 9-bit magnitude has MSB weight
// 2^6 (the largest E2M1 product is 36) and LSB weight 2^-2 (the smallest
// nonzero product is 0.5 * 0.5). The four DP2 results of an 8-term FP4 dot
// product therefore need no per-result exponent handling downstream.
#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "transdot/formats.hpp"

namespace transdot::fp4 {

inline constexpr int kDp2MagnitudeBits = 9;
/// Exponent of the magnitude's MSB weight.
inline constexpr int kDp2AnchorExp = 6;
/// Exponent of the magnitude's LSB weight.
inline constexpr int kDp2LsbExp = kDp2AnchorExp - (kDp2MagnitudeBits - 1);

struct Dp2Result {
  bool sign = false;
  std::uint16_t magnitude = 0;
  int exp = kDp2AnchorExp;

  friend bool operator==(const Dp2Result&, const Dp2Result&) = default;
};

namespace detail {

struct SignedProduct {
  bool sign;
  std::uint32_t magnitude;  // units of 2^kDp2LsbExp
};

// E2M1 value = sig * 2^(exp - 1), so a product is
// sig_a * sig_b * 2^(exp_a + exp_b - 2) = (sig_a * sig_b) << (exp_a + exp_b)
// in quarter units.
inline SignedProduct product(std::uint8_t a, std::uint8_t b) {
  const FPValue va = decode(kFP4, a);
  const FPValue vb = decode(kFP4, b);
  const std::uint32_t m = (va.sig * vb.sig) << (va.exp + vb.exp);
  return {static_cast<bool>(va.sign != vb.sign), m};
}

}  // namespace detail

/// Exact a0*b0 + a1*b1 for 4-bit E2M1 encodings (upper bits ignored).
inline Dp2Result dp2(std::uint8_t a0, std::uint8_t b0, std::uint8_t a1, std::uint8_t b1) {
  const auto p0 = detail::product(a0 & 0xF, b0 & 0xF);
  const auto p1 = detail::product(a1 & 0xF, b1 & 0xF);
  Dp2Result r;
  if (p0.sign == p1.sign) {
    r.magnitude = static_cast<std::uint16_t>(p0.magnitude + p1.magnitude);
    r.sign = p0.sign;
  } else if (p0.magnitude >= p1.magnitude) {
    r.magnitude = static_cast<std::uint16_t>(p0.magnitude - p1.magnitude);
    r.sign = p0.sign;
  } else {
    r.magnitude = static_cast<std::uint16_t>(p1.magnitude - p0.magnitude);
    r.sign = p1.sign;
  }
  if (r.magnitude == 0) r.sign = false;
  return r;
}

/// Four DP2 results over pairs (0,1), (2,3), (4,5), (6,7).
inline std::array<Dp2Result, 4> dp8_partials(std::span<const std::uint8_t, 8> a,
                                             std::span<const std::uint8_t, 8> b) {
  std::array<Dp2Result, 4> out;
  for (int k = 0; k < 4; ++k) out[k] = dp2(a[2 * k], b[2 * k], a[2 * k + 1], b[2 * k + 1]);
  return out;
}

}  // namespace transdot::fp4
