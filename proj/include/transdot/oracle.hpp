// SPDX-License-Identifier: Apache-2.0
//
// Exact-arithmetic reference. Operands are expanded to unbounded integers,
// products and sums are formed without loss, and one round-to-nearest-even
// step produces the result and its IEEE flags.
//
// Nothing here calls into the datapath or into formats::round_pack: field
// extraction, special-value rules and rounding are written independently so
// that datapath/oracle agreement is a meaningful check.
#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "transdot/error.hpp"
#include "transdot/formats.hpp"

namespace transdot::oracle {

using BigInt = boost::multiprecision::cpp_int;

/// (-1)^sign * mag * 2^scale. Zero is always (+, 0, 0); nonzero values keep
/// mag odd.
struct ExactNum {
  bool sign = false;
  BigInt mag = 0;
  long scale = 0;

  bool is_zero() const { return mag.is_zero(); }
  friend bool operator==(const ExactNum&, const ExactNum&) = default;
};

inline ExactNum make_exact(bool sign, BigInt mag, long scale) {
  ExactNum x;
  if (mag.is_zero()) return x;
  const auto tz = boost::multiprecision::lsb(mag);
  if (tz != 0) mag >>= tz;
  x.sign = sign;
  x.mag = std::move(mag);
  x.scale = scale + static_cast<long>(tz);
  return x;
}

namespace detail {

enum class Kind { finite, inf, nan };

struct Fields {
  bool sign;
  std::uint32_t exp_field;
  std::uint32_t man;
  Kind kind;
};

inline Fields fields_of(const FormatSpec& f, std::uint32_t bits) {
  bits &= f.word_mask();
  Fields r{};
  r.sign = (bits >> (f.total_bits - 1)) != 0;
  r.exp_field = (bits >> f.man_bits) & ((1u << f.exp_bits) - 1);
  r.man = bits & ((1u << f.man_bits) - 1);
  r.kind = Kind::finite;
  const bool top_exp = r.exp_field == (1u << f.exp_bits) - 1;
  if (f.profile == Profile::ieee) {
    if (top_exp) r.kind = r.man == 0 ? Kind::inf : Kind::nan;
  } else if (f.name == Format::fp8) {
    if (top_exp && r.man == (1u << f.man_bits) - 1) r.kind = Kind::nan;
  }
  return r;
}

inline bool fields_zero(const Fields& x) { return x.kind == Kind::finite && x.exp_field == 0 && x.man == 0; }

}  // namespace detail

inline ExactNum exact_of(const FormatSpec& f, std::uint32_t bits) {
  const detail::Fields x = detail::fields_of(f, bits);
  if (x.kind != detail::Kind::finite) throw NotFinite("exact_of: operand is INF or NaN");
  if (x.exp_field == 0) return make_exact(x.sign, BigInt(x.man), 1L - f.bias - f.man_bits);
  const BigInt mag = BigInt((1u << f.man_bits) | x.man);
  return make_exact(x.sign, mag, static_cast<long>(x.exp_field) - f.bias - f.man_bits);
}

inline ExactNum exact_of(const FormatSpec& f, const FPValue& v) {
  if (!v.is_finite()) throw NotFinite("exact_of: value is INF or NaN");
  return make_exact(v.sign, BigInt(v.sig), static_cast<long>(v.exp) - (f.precision() - 1));
}

inline ExactNum exact_mul(const ExactNum& x, const ExactNum& y) {
  if (x.is_zero() || y.is_zero()) return {};
  ExactNum r;
  r.sign = x.sign != y.sign;
  r.mag = x.mag * y.mag;
  r.scale = x.scale + y.scale;
  return r;
}

inline ExactNum exact_add(const ExactNum& x, const ExactNum& y) {
  if (x.is_zero()) return y;
  if (y.is_zero()) return x;
  const long scale = std::min(x.scale, y.scale);
  const BigInt mx = x.mag << static_cast<unsigned>(x.scale - scale);
  const BigInt my = y.mag << static_cast<unsigned>(y.scale - scale);
  if (x.sign == y.sign) return make_exact(x.sign, mx + my, scale);
  if (mx >= my) return make_exact(x.sign, mx - my, scale);
  return make_exact(y.sign, my - mx, scale);
}

inline ExactNum exact_neg(ExactNum x) {
  if (!x.is_zero()) x.sign = !x.sign;
  return x;
}

namespace detail {

// Round mag * 2^scale to a multiple of 2^target (nearest, ties to even).
// Returns the quotient; `inexact` reports a nonzero discarded part.
inline BigInt round_to(const BigInt& mag, long scale, long target, bool& inexact) {
  if (target <= scale) {
    inexact = false;
    return mag << static_cast<unsigned>(scale - target);
  }
  const auto shift = static_cast<unsigned>(target - scale);
  BigInt q = mag >> shift;
  const BigInt rem = mag - (q << shift);
  inexact = !rem.is_zero();
  if (inexact) {
    const BigInt half = BigInt(1) << (shift - 1);
    if (rem > half || (rem == half && boost::multiprecision::bit_test(q, 0))) ++q;
  }
  return q;
}

inline long msb_of(const BigInt& v) { return static_cast<long>(boost::multiprecision::msb(v)); }

inline std::uint32_t pack(const FormatSpec& f, bool sign, std::uint32_t exp_field, std::uint32_t man) {
  return (sign ? 1u << (f.total_bits - 1) : 0u) | (exp_field << f.man_bits) | man;
}

inline std::uint32_t largest_finite(const FormatSpec& f, bool sign) {
  const std::uint32_t top = (1u << f.exp_bits) - 1;
  const std::uint32_t all_man = (1u << f.man_bits) - 1;
  if (f.profile == Profile::ieee) return pack(f, sign, top - 1, all_man);
  if (f.name == Format::fp8) return pack(f, sign, top, all_man - 1);
  return pack(f, sign, top, all_man);
}

inline std::uint32_t default_nan(const FormatSpec& f) {
  const std::uint32_t top = (1u << f.exp_bits) - 1;
  if (f.profile == Profile::ieee) return pack(f, false, top, 1u << (f.man_bits - 1));
  if (f.name == Format::fp8) return pack(f, false, top, (1u << f.man_bits) - 1);
  throw UnsupportedProfile("format has no NaN");
}

}  // namespace detail

/// One RNE rounding of an exact value. Exact zero gives +0.
inline Rounded oracle_round(const FormatSpec& f, const ExactNum& x) {
  Rounded out;
  if (x.is_zero()) return out;

  const long p = f.precision();
  const long emin = 1 - f.bias;
  const long top_field = (1L << f.exp_bits) - 1;
  const long emax = (f.profile == Profile::ieee ? top_field - 1 : top_field) - f.bias;
  const BigInt max_sig = BigInt(detail::largest_finite(f, false) & ((1u << f.man_bits) - 1)) + (BigInt(1) << (p - 1));

  const long e = x.scale + detail::msb_of(x.mag);
  const long target = std::max(e - (p - 1), emin - (p - 1));
  bool inexact = false;
  BigInt q = detail::round_to(x.mag, x.scale, target, inexact);

  // Tininess after rounding: round with an unbounded exponent range and
  // compare against 2^emin.
  bool tiny = false;
  if (e < emin) {
    bool unused = false;
    const long t_unb = e - (p - 1);
    const BigInt q_unb = detail::round_to(x.mag, x.scale, t_unb, unused);
    tiny = t_unb + detail::msb_of(q_unb) < emin;
  }

  bool overflow = false;
  const long max_lsb = emax - (p - 1);
  if (!q.is_zero() && target >= max_lsb) {
    overflow = (q << static_cast<unsigned>(target - max_lsb)) > max_sig;
  }
  if (overflow) {
    out.flags.overflow = true;
    out.flags.inexact = true;
    out.bits = f.profile == Profile::ieee ? detail::pack(f, x.sign, static_cast<std::uint32_t>(top_field), 0)
                                          : detail::largest_finite(f, x.sign);
    return out;
  }

  out.flags.inexact = inexact;
  out.flags.underflow = tiny && inexact;
  if (q.is_zero()) {
    out.bits = detail::pack(f, x.sign, 0, 0);
    return out;
  }
  long lsb = target;
  if (detail::msb_of(q) == p) {  // carried into a new binade
    q >>= 1;
    ++lsb;
  }
  const auto qv = q.convert_to<std::uint32_t>();
  if (detail::msb_of(q) == p - 1) {
    const auto field = static_cast<std::uint32_t>(lsb + (p - 1) + f.bias);
    out.bits = detail::pack(f, x.sign, field, qv & ((1u << f.man_bits) - 1));
  } else {
    out.bits = detail::pack(f, x.sign, 0, qv);
  }
  return out;
}

/// Reference for round(sum_i a[i]*b[i] + c) over any number of terms with
/// a, b in `in` and c in `acc`.
inline Rounded oracle_dot(const FormatSpec& in, const FormatSpec& acc, std::span<const std::uint32_t> a,
                          std::span<const std::uint32_t> b, std::uint32_t c) {
  using detail::Kind;
  const detail::Fields fc = detail::fields_of(acc, c);

  // Special values first.
  bool saw_nan = fc.kind == Kind::nan;
  bool zero_times_inf = false;
  int inf_signs = 0;  // bit 0: +INF addend, bit 1: -INF addend
  if (fc.kind == Kind::inf) inf_signs |= fc.sign ? 2 : 1;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const detail::Fields fa = detail::fields_of(in, a[i]);
    const detail::Fields fb = detail::fields_of(in, b[i]);
    if (fa.kind == Kind::nan || fb.kind == Kind::nan) {
      saw_nan = true;
      continue;
    }
    const bool has_inf = fa.kind == Kind::inf || fb.kind == Kind::inf;
    if (has_inf && (detail::fields_zero(fa) || detail::fields_zero(fb))) {
      zero_times_inf = true;
    } else if (has_inf) {
      inf_signs |= (fa.sign != fb.sign) ? 2 : 1;
    }
  }
  const bool invalid = zero_times_inf || inf_signs == 3;
  if (invalid || saw_nan) {
    Rounded r;
    r.bits = detail::default_nan(acc);
    r.flags.invalid = invalid;
    return r;
  }
  if (inf_signs != 0) {
    const std::uint32_t top = (1u << acc.exp_bits) - 1;
    return Rounded{detail::pack(acc, inf_signs == 2, top, 0), {}};
  }

  ExactNum sum = exact_of(acc, c);
  bool every_addend_negative_zero = fc.sign && detail::fields_zero(fc);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const ExactNum prod = exact_mul(exact_of(in, a[i]), exact_of(in, b[i]));
    const detail::Fields fa = detail::fields_of(in, a[i]);
    const detail::Fields fb = detail::fields_of(in, b[i]);
    const bool neg_zero_product = prod.is_zero() && fa.sign != fb.sign;
    every_addend_negative_zero = every_addend_negative_zero && neg_zero_product;
    sum = exact_add(sum, prod);
  }
  if (sum.is_zero()) {
    return Rounded{detail::pack(acc, every_addend_negative_zero, 0, 0), {}};
  }
  return oracle_round(acc, sum);
}

inline Rounded oracle_fma(const FormatSpec& in, const FormatSpec& acc, std::uint32_t a, std::uint32_t b,
                          std::uint32_t c) {
  return oracle_dot(in, acc, std::span<const std::uint32_t>(&a, 1), std::span<const std::uint32_t>(&b, 1), c);
}

/// Unpacks `32 / in.total_bits` lanes from each word (lane 0 at the LSB).
inline std::vector<std::uint32_t> unpack_lanes(const FormatSpec& in, std::uint32_t word) {
  const int w = in.total_bits;
  const int k = 32 / w;
  std::vector<std::uint32_t> lanes(k);
  for (int i = 0; i < k; ++i) lanes[i] = w == 32 ? word : (word >> (i * w)) & ((1u << w) - 1);
  return lanes;
}

inline Rounded oracle_dpa(const FormatSpec& in, const FormatSpec& acc, std::uint32_t a_word, std::uint32_t b_word,
                          std::uint32_t c) {
  const auto a = unpack_lanes(in, a_word);
  const auto b = unpack_lanes(in, b_word);
  return oracle_dot(in, acc, a, b, c);
}

/// Lane-wise reference for packed SIMD FMA. Returns per-lane results; the
/// packed word is the OR of the shifted lane bits.
inline std::vector<Rounded> oracle_simd_fma(const FormatSpec& in, std::uint32_t a_word, std::uint32_t b_word,
                                            std::uint32_t c_word) {
  const auto a = unpack_lanes(in, a_word);
  const auto b = unpack_lanes(in, b_word);
  const auto c = unpack_lanes(in, c_word);
  std::vector<Rounded> out;
  out.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out.push_back(oracle_fma(in, in, a[i], b[i], c[i]));
  return out;
}

}  // namespace transdot::oracle
