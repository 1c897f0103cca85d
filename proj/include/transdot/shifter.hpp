// SPDX-License-Identifier: Apache-2.0
//
// Reconfigurable barrel shifter: one n-bit shifter that also runs as two
// independent n/2-bit shifters or four independent n/4-bit shifters.
//
// Subword i occupies bits [(i+1)*w - 1 : i*w] with w = n / lanes, so subword 0
// is the least significant. Bits never cross a subword boundary, and the bits
// a subword loses are collected into its own sticky bit.
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "transdot/error.hpp"
#include "transdot/wide.hpp"

namespace transdot::shifter {

/// Mode select as wired in hardware: mode[1:0] = 2'b0x full width,
/// 2'b10 two halves, 2'b11 four quarters.
enum class ShiftMode : std::uint8_t { full, half, quarter };

enum class Direction : std::uint8_t { left, right };

inline constexpr std::uint8_t mode_bits(ShiftMode m) {
  switch (m) {
    case ShiftMode::full: return 0b00;
    case ShiftMode::half: return 0b10;
    case ShiftMode::quarter: return 0b11;
  }
  return 0;
}

inline constexpr ShiftMode mode_from_bits(std::uint8_t bits) {
  if ((bits & 0b10) == 0) return ShiftMode::full;
  return (bits & 0b01) ? ShiftMode::quarter : ShiftMode::half;
}

inline constexpr int lane_count(ShiftMode m) {
  switch (m) {
    case ShiftMode::full: return 1;
    case ShiftMode::half: return 2;
    case ShiftMode::quarter: return 4;
  }
  return 1;
}

inline constexpr int kMaxWidth = 128;

struct ShiftRequest {
  int width = kMaxWidth;  // n, a power of two in [4, 128]
  u128 data = 0;
  ShiftMode mode = ShiftMode::full;
  std::array<int, 4> amounts{};  // first lane_count(mode) entries are used
  Direction direction = Direction::right;
};

struct ShiftResult {
  u128 result = 0;
  std::uint8_t sticky = 0;  // bit i: subword i lost a set bit
  friend bool operator==(const ShiftResult&, const ShiftResult&) = default;
};

struct StageTrace {
  std::vector<u128> stages;     // word after each of the log2(n) stages
  std::vector<bool> bypassed;   // stage forced to pass-through by the mode
  std::uint8_t sticky = 0;
};

inline int log2_exact(int n) {
  int k = 0;
  while ((1 << k) < n) ++k;
  return k;
}

namespace detail {

inline void validate(const ShiftRequest& req) {
  const int n = req.width;
  if (n < 4 || n > kMaxWidth || (n & (n - 1)) != 0) {
    throw InvalidWidth("shifter width must be a power of two in [4, 128], got " + std::to_string(n));
  }
  if ((req.data & ~low_mask(n)) != 0) {
    throw InvalidWidth("shifter data wider than " + std::to_string(n) + " bits");
  }
  const int w = n / lane_count(req.mode);
  for (int i = 0; i < lane_count(req.mode); ++i) {
    if (req.amounts[i] < 0 || req.amounts[i] >= w) {
      throw InvalidShiftAmount("shift amount " + std::to_string(req.amounts[i]) + " for subword " +
                               std::to_string(i) + " must be in [0, " + std::to_string(w) + ")");
    }
  }
}

// Mask with the low `bits` bits of every w-bit subword set.
inline u128 per_lane_low(int n, int w, int bits) {
  u128 m = 0;
  for (int base = 0; base < n; base += w) m |= low_mask(bits) << base;
  return m;
}

}  // namespace detail

/// Functional model: each subword is shifted on its own.
inline ShiftResult shift_cfg(const ShiftRequest& req) {
  detail::validate(req);
  const int lanes = lane_count(req.mode);
  const int w = req.width / lanes;
  const u128 lane_mask = low_mask(w);
  ShiftResult out;
  for (int i = 0; i < lanes; ++i) {
    const u128 sub = (req.data >> (i * w)) & lane_mask;
    const int a = req.amounts[i];
    u128 shifted;
    u128 lost;
    if (req.direction == Direction::right) {
      shifted = a == 0 ? sub : sub >> a;
      lost = sub & low_mask(a);
    } else {
      shifted = a == 0 ? sub : (sub << a) & lane_mask;
      lost = a == 0 ? 0 : sub >> (w - a);
    }
    out.result |= shifted << (i * w);
    if (lost != 0) out.sticky |= static_cast<std::uint8_t>(1u << i);
  }
  return out;
}

/// Structural model: log2(n) stages of 2:1 muxes, stage k shifting by 2^k.
/// In the narrower modes each subword steers its own stage selects from its
/// amount, boundary-blocking muxes zero the bits that would enter from the
/// neighbouring subword, and stages with 2^k >= subword width are bypassed.
inline StageTrace stage_trace(const ShiftRequest& req) {
  detail::validate(req);
  const int n = req.width;
  const int lanes = lane_count(req.mode);
  const int w = n / lanes;
  const int stages = log2_exact(n);
  const int active = log2_exact(w);

  StageTrace trace;
  trace.stages.reserve(stages);
  trace.bypassed.reserve(stages);
  u128 word = req.data;
  for (int k = 0; k < stages; ++k) {
    if (k >= active) {
      trace.stages.push_back(word);
      trace.bypassed.push_back(true);
      continue;
    }
    const int s = 1 << k;
    u128 moved;
    u128 lost;
    if (req.direction == Direction::right) {
      // Blocking: clear the top s bits of each subword, which came from the
      // subword above.
      moved = (word >> s) & ~(detail::per_lane_low(n, w, s) << (w - s)) & low_mask(n);
      lost = word & detail::per_lane_low(n, w, s);
    } else {
      moved = (word << s) & ~detail::per_lane_low(n, w, s) & low_mask(n);
      lost = word & (detail::per_lane_low(n, w, s) << (w - s));
    }
    u128 next = 0;
    for (int i = 0; i < lanes; ++i) {
      const u128 lane = low_mask(w) << (i * w);
      const bool sel = (req.amounts[i] >> k) & 1;
      next |= (sel ? moved : word) & lane;
      if (sel && (lost & lane) != 0) trace.sticky |= static_cast<std::uint8_t>(1u << i);
    }
    word = next;
    trace.stages.push_back(word);
    trace.bypassed.push_back(false);
  }
  return trace;
}

}  // namespace transdot::shifter
