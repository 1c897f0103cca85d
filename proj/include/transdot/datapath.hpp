// SPDX-License-Identifier: Apache-2.0
//
// Top-level execution engine: scalar FMA, packed-SIMD FMA and trans-precision
// dot-product accumulation (DPA), built from the shared shifter, multiplier
// and FP4 DP2 models.
//
// Supported modes:
//
//   input  encoding  scalar/SIMD FMA  DPA     accumulator
//   FP32   E8M23     1-way            1-term  FP32
//   FP16   E5M10     2-way            2-term  FP32 / FP16
//   FP8    E4M3      4-way            4-term  FP32 / FP16
//   FP4    E2M1      -                8-term  FP32 / FP16
//
// DPA is defined as the exact sum of all products and C, rounded once to
// nearest-even. The product sum is held exactly in a fixed-point window that
// spans every product exponent the input format can produce; C is then
// merged against it with a sticky bit and a single rounding.
//
// Packed lanes fill the 32-bit operand words from the LSB, lane 0 first.
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>

#include "transdot/error.hpp"
#include "transdot/formats.hpp"
#include "transdot/fp4dp2.hpp"
#include "transdot/multiplier.hpp"
#include "transdot/shifter.hpp"
#include "transdot/wide.hpp"

namespace transdot {

enum class OpKind : std::uint8_t { fma_scalar, fma_simd, dpa };

constexpr std::string_view to_string(OpKind k) {
  switch (k) {
    case OpKind::fma_scalar: return "fma";
    case OpKind::fma_simd: return "simd";
    case OpKind::dpa: return "dpa";
  }
  return "?";
}

/// Latency in cycles / throughput in operations per cycle.
struct Timing {
  int latency = 4;
  int throughput = 1;
  friend bool operator==(const Timing&, const Timing&) = default;
};

struct DatapathOptions {
  /// Insert the optional multiplier pipeline stage in DPA mode (+1 cycle).
  bool dpa_pipeline_stage = false;
};

inline constexpr int kPipelineDepth = 4;
inline constexpr int kMaxLanes = 4;

struct OpRequest {
  OpKind kind = OpKind::fma_scalar;
  FormatSpec fmt_in = kFP32;
  FormatSpec fmt_acc = kFP32;
  std::uint32_t a_word = 0;
  std::uint32_t b_word = 0;
  std::uint32_t c_word = 0;
  int terms = 1;
};

struct OpResult {
  std::uint32_t result_word = 0;
  std::array<ExceptionFlags, kMaxLanes> flags{};
  int lanes = 1;
  Timing timing;

  friend bool operator==(const OpResult&, const OpResult&) = default;
};

inline constexpr int lanes_per_word(const FormatSpec& f) { return 32 / f.total_bits; }

inline constexpr std::uint32_t lane_of(std::uint32_t word, int width, int i) {
  return width >= 32 ? word : (word >> (i * width)) & ((1u << width) - 1);
}

/// Expected `terms` for a mode: 1 for scalar FMA, the lane count otherwise.
inline constexpr int terms_for(OpKind kind, const FormatSpec& in) {
  return kind == OpKind::fma_scalar ? 1 : lanes_per_word(in);
}

inline bool is_supported(OpKind kind, const FormatSpec& in, const FormatSpec& acc, int terms) {
  if (terms != terms_for(kind, in)) return false;
  switch (kind) {
    case OpKind::fma_scalar:
      return in.name != Format::fp4 && acc == in;
    case OpKind::fma_simd:
      return (in.name == Format::fp16 || in.name == Format::fp8) && acc == in;
    case OpKind::dpa:
      if (in.name == Format::fp32) return acc.name == Format::fp32;
      return acc.name == Format::fp32 || acc.name == Format::fp16;
  }
  return false;
}

inline void require_supported(OpKind kind, const FormatSpec& in, const FormatSpec& acc, int terms) {
  if (!is_supported(kind, in, acc, terms)) {
    throw UnsupportedMode(std::string(to_string(kind)) + " with " + std::string(to_string(in.name)) +
                          " inputs, " + std::string(to_string(acc.name)) + " accumulator and " +
                          std::to_string(terms) + " terms is not a supported mode");
  }
}

inline Timing timing_for(OpKind kind, const DatapathOptions& opts = {}) {
  Timing t{kPipelineDepth, 1};
  if (kind == OpKind::dpa && opts.dpa_pipeline_stage) ++t.latency;
  return t;
}

namespace detail {

/// Exact signed value mag * 2^lsb_exp.
struct Addend {
  bool sign = false;
  u128 mag = 0;
  int lsb_exp = 0;
};

struct LaneInput {
  Addend x;
  Addend c;
  /// Sign of the result when both addends are zeros.
  bool zero_negative = false;
};

inline Addend addend_of(const FormatSpec& fmt, const FPValue& v) {
  return {v.sign, v.sig, v.exp - (fmt.precision() - 1)};
}

inline int msb_exp(const Addend& a) { return a.lsb_exp + bit_length(a.mag) - 1; }

/// Alignment, two's-complement addition, normalization and rounding for one
/// to four lanes. The lanes share one reconfigurable shifter for alignment
/// and one for normalization; lane width is 128 / lanes bits.
///
/// Within a lane the larger operand's MSB sits at bit nw-3 (below the sign
/// and carry bits) and bit 0 is the sticky position. The smaller operand is
/// right-shifted by the exponent difference; whatever reaches bit 0 or below
/// is ORed into the sticky bit.
inline void align_add_round(shifter::ShiftMode mode, const FormatSpec& acc, std::span<const LaneInput> in,
                            std::span<Rounded> out) {
  const int lanes = shifter::lane_count(mode);
  const int nw = shifter::kMaxWidth / lanes;
  const int top = nw - 3;
  const int p = acc.precision();

  struct LaneState {
    bool active = false;
    int anchor = 0;
    Addend big;
    Addend small;
  };
  std::array<LaneState, kMaxLanes> st{};

  auto justify = [&](const Addend& a) -> u128 {
    if (a.mag == 0) return 0;
    const int len = bit_length(a.mag);
    if (len > top) throw WindowOverflow("operand of " + std::to_string(len) + " bits exceeds the alignment lane");
    return a.mag << (top - (len - 1));
  };

  shifter::ShiftRequest align{shifter::kMaxWidth, 0, mode, {}, shifter::Direction::right};
  std::array<u128, kMaxLanes> big_word{};
  for (int i = 0; i < lanes; ++i) {
    const LaneInput& li = in[i];
    LaneState& s = st[i];
    if (li.x.mag == 0 && li.c.mag == 0) continue;
    s.active = true;
    const bool x_big = li.c.mag == 0 || (li.x.mag != 0 && msb_exp(li.x) >= msb_exp(li.c));
    s.big = x_big ? li.x : li.c;
    s.small = x_big ? li.c : li.x;
    s.anchor = msb_exp(s.big);
    big_word[i] = justify(s.big);
    align.data |= justify(s.small) << (i * nw);
    if (s.small.mag != 0) {
      align.amounts[i] = std::min(s.anchor - msb_exp(s.small), nw - 1);
    }
  }
  const shifter::ShiftResult aligned = shifter::shift_cfg(align);

  shifter::ShiftRequest norm{shifter::kMaxWidth, 0, mode, {}, shifter::Direction::left};
  std::array<bool, kMaxLanes> neg{};
  std::array<int, kMaxLanes> len{};
  for (int i = 0; i < lanes; ++i) {
    LaneState& s = st[i];
    if (!s.active) continue;
    u128 small = (aligned.result >> (i * nw)) & low_mask(nw);
    const bool sticky = ((aligned.sticky >> i) & 1u) || (small & 1u);
    small = (small & ~u128{1}) | (sticky ? 1u : 0u);

    const i128 big_v = static_cast<i128>(big_word[i]);
    const i128 small_v = static_cast<i128>(small);
    const i128 sum = (s.big.sign ? -big_v : big_v) + (s.small.sign ? -small_v : small_v);
    if (sum == 0) {
      s.active = false;  // exact cancellation of nonzero addends
      continue;
    }
    neg[i] = sum < 0;
    const u128 mag = magnitude(sum);
    len[i] = bit_length(mag);
    norm.data |= mag << (i * nw);
    norm.amounts[i] = nw - len[i];
  }
  const shifter::ShiftResult normalized = shifter::shift_cfg(norm);

  for (int i = 0; i < lanes; ++i) {
    const LaneState& s = st[i];
    const LaneInput& li = in[i];
    if (!s.active) {
      const bool both_zero = li.x.mag == 0 && li.c.mag == 0;
      out[i] = Rounded{sign_bit(acc, both_zero && li.zero_negative), {}};
      continue;
    }
    const u128 v = (normalized.result >> (i * nw)) & low_mask(nw);
    const int drop = nw - (p + 2);
    const std::uint64_t head = static_cast<std::uint64_t>(v >> drop);
    const bool rest = (v & low_mask(drop)) != 0;
    const std::uint64_t sig_ext = (head << 1) | (rest ? 1u : 0u);
    const int exp = s.anchor - top + (len[i] - 1);
    out[i] = round_pack(acc, neg[i], exp, sig_ext);
  }
}

inline Rounded align_add_round_scalar(const FormatSpec& acc, const LaneInput& lane) {
  Rounded r;
  align_add_round(shifter::ShiftMode::full, acc, std::span<const LaneInput>(&lane, 1), std::span<Rounded>(&r, 1));
  return r;
}

/// NaN, infinity and invalid handling shared by all operation kinds.
/// Returns the result when a special case applies.
inline std::optional<Rounded> special_result(const FormatSpec& acc, std::span<const FPValue> a,
                                             std::span<const FPValue> b, const FPValue& c) {
  bool any_nan = c.cls == FpClass::nan;
  bool invalid = false;
  bool pos_inf = false;
  bool neg_inf = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool nan = a[i].cls == FpClass::nan || b[i].cls == FpClass::nan;
    const bool inf = a[i].cls == FpClass::inf || b[i].cls == FpClass::inf;
    const bool zero = a[i].cls == FpClass::zero || b[i].cls == FpClass::zero;
    any_nan |= nan;
    if (nan) continue;
    if (inf && zero) {
      invalid = true;
    } else if (inf) {
      (a[i].sign != b[i].sign ? neg_inf : pos_inf) = true;
    }
  }
  if (c.cls == FpClass::inf) (c.sign ? neg_inf : pos_inf) = true;
  if (pos_inf && neg_inf) invalid = true;

  if (invalid || any_nan) {
    Rounded r{canonical_nan(acc), {}};
    r.flags.invalid = invalid;
    return r;
  }
  if (pos_inf || neg_inf) return Rounded{infinity_bits(acc, neg_inf), {}};
  return std::nullopt;
}

/// True when every product and C is a zero of negative sign.
inline bool all_negative_zeros(std::span<const FPValue> a, std::span<const FPValue> b, const FPValue& c) {
  if (c.cls != FpClass::zero || !c.sign) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool zero = a[i].cls == FpClass::zero || b[i].cls == FpClass::zero;
    if (!zero || a[i].sign == b[i].sign) return false;
  }
  return true;
}

inline Addend product_addend(const FormatSpec& in, const FPValue& a, const FPValue& b, std::uint64_t sig_product) {
  const int shift = in.precision() - 1;
  return {a.sign != b.sign, sig_product, (a.exp - shift) + (b.exp - shift)};
}

/// Exponent span of product LSBs, which is also the DPA window width.
inline int product_exponent_span(const FormatSpec& in) {
  const int lsb_min = in.emin() - (in.precision() - 1);
  const int lsb_max = in.emax() - (in.precision() - 1);
  return 2 * (lsb_max - lsb_min);
}

}  // namespace detail

/// Scalar fused multiply-add with any input/accumulator pairing:
/// round(a*b + c) with a, b in `in` and c, result in `acc`.
inline Rounded fma_mixed(const FormatSpec& in, const FormatSpec& acc, std::uint32_t a, std::uint32_t b,
                         std::uint32_t c) {
  const FPValue va = decode(in, a);
  const FPValue vb = decode(in, b);
  const FPValue vc = decode(acc, c);
  const std::span<const FPValue> sa(&va, 1);
  const std::span<const FPValue> sb(&vb, 1);
  if (auto r = detail::special_result(acc, sa, sb, vc)) return *r;

  detail::LaneInput lane;
  lane.x = detail::product_addend(in, va, vb, multiplier::multiply_scalar(va.sig, vb.sig));
  lane.c = detail::addend_of(acc, vc);
  lane.zero_negative = detail::all_negative_zeros(sa, sb, vc);
  return detail::align_add_round_scalar(acc, lane);
}

/// Scalar FMA; the accumulator format equals the input format.
inline Rounded fma(const FormatSpec& in, const FormatSpec& acc, std::uint32_t a, std::uint32_t b, std::uint32_t c) {
  require_supported(OpKind::fma_scalar, in, acc, 1);
  return fma_mixed(in, acc, a, b, c);
}

/// Packed-SIMD FMA: 2 FP16 lanes or 4 FP8 lanes, each an independent FMA
/// in the input format. All lanes go through one partitioned shifter pass.
inline OpResult simd_fma(const FormatSpec& in, std::uint32_t a_word, std::uint32_t b_word, std::uint32_t c_word) {
  const int k = lanes_per_word(in);
  require_supported(OpKind::fma_simd, in, in, k);
  const int w = in.total_bits;
  const auto mode = k == 2 ? shifter::ShiftMode::half : shifter::ShiftMode::quarter;
  const auto mul_mode = k == 2 ? multiplier::MulMode::simd2x12 : multiplier::MulMode::simd4x6;

  std::array<FPValue, kMaxLanes> va{}, vb{}, vc{};
  std::array<std::uint32_t, kMaxLanes> sa{}, sb{};
  for (int i = 0; i < k; ++i) {
    va[i] = decode(in, lane_of(a_word, w, i));
    vb[i] = decode(in, lane_of(b_word, w, i));
    vc[i] = decode(in, lane_of(c_word, w, i));
    // NaN/INF significands never reach the array.
    sa[i] = va[i].is_finite() ? va[i].sig : 0;
    sb[i] = vb[i].is_finite() ? vb[i].sig : 0;
  }
  const auto products = multiplier::multiply(mul_mode, std::span(sa.data(), k), std::span(sb.data(), k));

  std::array<detail::LaneInput, kMaxLanes> lanes{};
  std::array<std::optional<Rounded>, kMaxLanes> special{};
  for (int i = 0; i < k; ++i) {
    const std::span<const FPValue> pa(&va[i], 1);
    const std::span<const FPValue> pb(&vb[i], 1);
    special[i] = detail::special_result(in, pa, pb, vc[i]);
    if (special[i]) continue;
    lanes[i].x = detail::product_addend(in, va[i], vb[i], products[i]);
    lanes[i].c = detail::addend_of(in, vc[i]);
    lanes[i].zero_negative = detail::all_negative_zeros(pa, pb, vc[i]);
  }
  std::array<Rounded, kMaxLanes> rounded{};
  detail::align_add_round(mode, in, std::span<const detail::LaneInput>(lanes.data(), k),
                          std::span<Rounded>(rounded.data(), k));

  OpResult out;
  out.lanes = k;
  out.timing = timing_for(OpKind::fma_simd);
  for (int i = 0; i < k; ++i) {
    const Rounded r = special[i] ? *special[i] : rounded[i];
    out.result_word |= r.bits << (i * w);
    out.flags[i] = r.flags;
  }
  return out;
}

/// Dot-product accumulation: round(sum_i a_i*b_i + c) with one rounding.
/// FP4 inputs go through the DP2 stage (eight terms in four pairs).
inline OpResult dpa(const FormatSpec& in, const FormatSpec& acc, std::uint32_t a_word, std::uint32_t b_word,
                    std::uint32_t c, const DatapathOptions& opts = {}) {
  const int k = lanes_per_word(in);
  require_supported(OpKind::dpa, in, acc, k);
  const int w = in.total_bits;

  std::array<FPValue, 8> va{}, vb{};
  for (int i = 0; i < k; ++i) {
    va[i] = decode(in, lane_of(a_word, w, i));
    vb[i] = decode(in, lane_of(b_word, w, i));
  }
  const FPValue vc = decode(acc, c);
  const std::span<const FPValue> sa(va.data(), k);
  const std::span<const FPValue> sb(vb.data(), k);

  OpResult out;
  out.lanes = 1;
  out.timing = timing_for(OpKind::dpa, opts);
  if (auto r = detail::special_result(acc, sa, sb, vc)) {
    out.result_word = r->bits;
    out.flags[0] = r->flags;
    return out;
  }

  detail::LaneInput lane;
  lane.c = detail::addend_of(acc, vc);
  lane.zero_negative = detail::all_negative_zeros(sa, sb, vc);

  if (in.name == Format::fp32) {
    lane.x = detail::product_addend(in, va[0], vb[0], multiplier::multiply_scalar(va[0].sig, vb[0].sig));
  } else {
    std::array<multiplier::DpaTerm, 4> terms{};
    multiplier::MulMode mode;
    int window = 0;
    int anchor_lsb = 0;
    if (in.name == Format::fp4) {
      mode = multiplier::MulMode::dpa_fp4;
      std::array<std::uint8_t, 8> a4{}, b4{};
      for (int i = 0; i < 8; ++i) {
        a4[i] = static_cast<std::uint8_t>(lane_of(a_word, 4, i));
        b4[i] = static_cast<std::uint8_t>(lane_of(b_word, 4, i));
      }
      const auto partials = fp4::dp8_partials(a4, b4);
      for (int t = 0; t < 4; ++t) terms[t] = {partials[t].magnitude, partials[t].sign, 0};
      anchor_lsb = fp4::kDp2LsbExp;
    } else {
      mode = k == 2 ? multiplier::MulMode::dpa2 : multiplier::MulMode::dpa4;
      std::array<std::uint32_t, 4> sig_a{}, sig_b{};
      for (int i = 0; i < k; ++i) {
        sig_a[i] = va[i].sig;
        sig_b[i] = vb[i].sig;
      }
      const auto products = multiplier::multiply(mode == multiplier::MulMode::dpa2 ? multiplier::MulMode::simd2x12
                                                                                   : multiplier::MulMode::simd4x6,
                                                 std::span(sig_a.data(), k), std::span(sig_b.data(), k));
      std::array<detail::Addend, 4> prods{};
      anchor_lsb = std::numeric_limits<int>::min();
      for (int i = 0; i < k; ++i) {
        prods[i] = detail::product_addend(in, va[i], vb[i], products[i]);
        if (prods[i].mag != 0) anchor_lsb = std::max(anchor_lsb, prods[i].lsb_exp);
      }
      if (anchor_lsb == std::numeric_limits<int>::min()) anchor_lsb = 0;
      for (int i = 0; i < k; ++i) {
        const int shift = prods[i].mag != 0 ? anchor_lsb - prods[i].lsb_exp : 0;
        terms[i] = {static_cast<std::uint64_t>(prods[i].mag), prods[i].sign, shift};
      }
      window = detail::product_exponent_span(in);
    }
    const auto sum = multiplier::dpa_reduce(mode, std::span<const multiplier::DpaTerm>(terms.data(), k == 8 ? 4 : k),
                                            window);
    if (sum.lossy) throw WindowOverflow("DPA product window lost bits");
    lane.x = {sum.value < 0, magnitude(sum.value), anchor_lsb - window - 1};
  }

  const Rounded r = detail::align_add_round_scalar(acc, lane);
  out.result_word = r.bits;
  out.flags[0] = r.flags;
  return out;
}

/// Chained scalar FMAs, r <- round(a_i*b_i + r) from r = c, one rounding per
/// term. Flags accumulate over the chain.
inline OpResult seq_dpa_reference(const FormatSpec& in, const FormatSpec& acc, std::uint32_t a_word,
                                  std::uint32_t b_word, std::uint32_t c) {
  const int k = lanes_per_word(in);
  require_supported(OpKind::dpa, in, acc, k);
  OpResult out;
  out.lanes = 1;
  out.timing = timing_for(OpKind::fma_scalar);
  out.timing.latency *= k;
  std::uint32_t r = c;
  for (int i = 0; i < k; ++i) {
    const Rounded step =
        fma_mixed(in, acc, lane_of(a_word, in.total_bits, i), lane_of(b_word, in.total_bits, i), r);
    r = step.bits;
    out.flags[0] |= step.flags;
  }
  out.result_word = r;
  return out;
}

inline OpResult execute(const OpRequest& req, const DatapathOptions& opts = {}) {
  require_supported(req.kind, req.fmt_in, req.fmt_acc, req.terms);
  switch (req.kind) {
    case OpKind::fma_scalar: {
      const int w = req.fmt_in.total_bits;
      const Rounded r = fma(req.fmt_in, req.fmt_acc, lane_of(req.a_word, w, 0), lane_of(req.b_word, w, 0),
                            lane_of(req.c_word, w, 0));
      OpResult out;
      out.result_word = r.bits;
      out.flags[0] = r.flags;
      out.timing = timing_for(OpKind::fma_scalar, opts);
      return out;
    }
    case OpKind::fma_simd:
      return simd_fma(req.fmt_in, req.a_word, req.b_word, req.c_word);
    case OpKind::dpa:
      return dpa(req.fmt_in, req.fmt_acc, req.a_word, req.b_word, req.c_word & req.fmt_acc.word_mask(), opts);
  }
  return {};
}

}  // namespace transdot
