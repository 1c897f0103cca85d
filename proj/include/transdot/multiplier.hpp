// SPDX-License-Identifier: Apache-2.0
//
// Multi-mode array multiplier. The 24-bit operands are split into four 6-bit
// segments; the 16 segment products are formed once and combined per mode:
//
//   scalar24   every segment product, weighted by 2^(6(i+j))
//   simd2x12   only the two 12x12 diagonal blocks, one product per block
//   simd4x6    only the four diagonal 6x6 products
//
// Segment products outside the active blocks are gated to zero. The DPA modes
// reuse the SIMD product layout and feed the reduction tree, where each term
// is aligned and conditionally negated before summation.
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <string>

#include "transdot/error.hpp"
#include "transdot/wide.hpp"

namespace transdot::multiplier {

enum class MulMode : std::uint8_t { scalar24, simd2x12, simd4x6, dpa2, dpa4, dpa_fp4 };

inline constexpr int kSegmentBits = 6;
inline constexpr int kSegments = 4;

/// Number of independent products for a mode.
inline constexpr int lane_count(MulMode m) {
  switch (m) {
    case MulMode::scalar24: return 1;
    case MulMode::simd2x12:
    case MulMode::dpa2: return 2;
    case MulMode::simd4x6:
    case MulMode::dpa4:
    case MulMode::dpa_fp4: return 4;
  }
  return 1;
}

inline constexpr int lane_bits(MulMode m) { return 24 / lane_count(m); }

inline constexpr bool is_dpa(MulMode m) {
  return m == MulMode::dpa2 || m == MulMode::dpa4 || m == MulMode::dpa_fp4;
}

using Segments = std::array<std::uint32_t, kSegments>;
using PartialProducts = std::array<std::array<std::uint64_t, kSegments>, kSegments>;

/// Segment i of a 24-bit operand holds bits [6i+5 : 6i].
inline Segments split_segments(std::uint32_t operand24) {
  Segments s{};
  for (int i = 0; i < kSegments; ++i) s[i] = (operand24 >> (kSegmentBits * i)) & 0x3Fu;
  return s;
}

/// Packs per-lane operands into the 24-bit operand word, lane k at bits
/// [(k+1)*lane_bits - 1 : k*lane_bits].
inline std::uint32_t pack_lanes(MulMode mode, std::span<const std::uint32_t> lanes) {
  const int count = lane_count(mode);
  const int bits = lane_bits(mode);
  if (mode == MulMode::dpa_fp4) {
    throw InvalidSegmentation("dpa_fp4 products come from the FP4 DP2 stage, not the array");
  }
  if (static_cast<int>(lanes.size()) != count) {
    throw InvalidSegmentation("mode expects " + std::to_string(count) + " operand lanes, got " +
                              std::to_string(lanes.size()));
  }
  std::uint32_t word = 0;
  for (int k = 0; k < count; ++k) {
    if (lanes[k] >> bits) {
      throw InvalidSegmentation("lane " + std::to_string(k) + " operand exceeds " + std::to_string(bits) +
                                " bits");
    }
    word |= lanes[k] << (k * bits);
  }
  return word;
}

inline PartialProducts partial_products(const Segments& a, const Segments& b) {
  PartialProducts pp{};
  for (int i = 0; i < kSegments; ++i)
    for (int j = 0; j < kSegments; ++j) pp[i][j] = std::uint64_t{a[i]} * b[j];
  return pp;
}

/// Segment pair (i, j) contributes to lane `i / span` iff both segments sit
/// in the same lane; everything else is gated.
inline bool gated(MulMode mode, int i, int j) {
  const int span = kSegments / lane_count(mode);
  return i / span != j / span;
}

/// Products of lanes [0, lane_count(mode)); the remaining entries are zero.
using Products = std::array<std::uint64_t, kSegments>;

/// Structural multiply: segment products, gating and per-lane reduction.
/// Returns one exact product per lane.
inline Products multiply(MulMode mode, std::span<const std::uint32_t> a_lanes,
                         std::span<const std::uint32_t> b_lanes) {
  const Segments a = split_segments(pack_lanes(mode, a_lanes));
  const Segments b = split_segments(pack_lanes(mode, b_lanes));
  const PartialProducts pp = partial_products(a, b);
  const int count = lane_count(mode);
  const int span = kSegments / count;
  Products out{};
  for (int i = 0; i < kSegments; ++i) {
    for (int j = 0; j < kSegments; ++j) {
      if (gated(mode, i, j)) continue;
      const int lane = i / span;
      const int weight = kSegmentBits * ((i - lane * span) + (j - lane * span));
      out[lane] += pp[i][j] << weight;
    }
  }
  return out;
}

inline std::uint64_t multiply_scalar(std::uint32_t a, std::uint32_t b) {
  const std::uint32_t la[1] = {a};
  const std::uint32_t lb[1] = {b};
  return multiply(MulMode::scalar24, la, lb)[0];
}

/// One reduction-tree input: a product magnitude with its sign and its
/// right-alignment relative to the largest-exponent term.
struct DpaTerm {
  std::uint64_t magnitude = 0;
  bool sign = false;
  int rel_shift = 0;
};

/// Two's-complement reduction result. Each term is placed `window_bits`
/// above an appended sticky position, shifted right by its rel_shift, and
/// conditionally negated; `value` is the sum in units of
/// 2^-(window_bits + 1) of an unshifted term's LSB. `lossy` reports that some
/// term lost bits into its sticky position.
struct DpaSum {
  i128 value = 0;
  bool lossy = false;
};

inline constexpr int expected_terms(MulMode m) { return lane_count(m); }

inline DpaSum dpa_reduce(MulMode mode, std::span<const DpaTerm> terms, int window_bits) {
  if (!is_dpa(mode)) throw InvalidSegmentation("dpa_reduce needs a DPA multiplier mode");
  if (static_cast<int>(terms.size()) != expected_terms(mode)) {
    throw InvalidSegmentation("mode expects " + std::to_string(expected_terms(mode)) + " terms, got " +
                              std::to_string(terms.size()));
  }
  int widest = 0;
  for (const DpaTerm& t : terms) {
    if (t.rel_shift < 0) throw InvalidShiftAmount("negative alignment shift");
    widest = std::max(widest, bit_length(t.magnitude));
  }
  // Sign, carries for up to four terms, magnitude, window and sticky.
  if (window_bits < 0 || 1 + 2 + widest + window_bits + 1 > 127) {
    throw WindowOverflow("reduction window of " + std::to_string(window_bits) + " bits cannot hold " +
                         std::to_string(widest) + "-bit terms");
  }

  DpaSum out;
  for (const DpaTerm& t : terms) {
    const u128 placed = u128{t.magnitude} << window_bits;
    u128 aligned;
    bool sticky;
    if (t.rel_shift >= 128) {
      aligned = 0;
      sticky = placed != 0;
    } else {
      aligned = placed >> t.rel_shift;
      sticky = (placed & low_mask(t.rel_shift)) != 0;
    }
    out.lossy |= sticky;
    const i128 v = static_cast<i128>((aligned << 1) | (sticky ? 1u : 0u));
    out.value += t.sign ? -v : v;
  }
  return out;
}

}  // namespace transdot::multiplier
