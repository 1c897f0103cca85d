// SPDX-License-Identifier: Apache-2.0
//
// Encodings, decoding and the final rounding stage for the four operand
// formats: FP32 (E8M23), FP16 (E5M10), FP8 (E4M3) and FP4 (E2M1).
//
// A decoded finite value is   (-1)^sign * sig * 2^(exp - (p - 1))
// where p = man_bits + 1 and sig carries the hidden bit explicitly.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "transdot/error.hpp"

namespace transdot {

enum class Format : std::uint8_t { fp32, fp16, fp8, fp4 };

/// Special-value profile. `ieee` reserves the all-ones exponent for INF/NaN.
/// `finite_extended` has no infinity; FP8 keeps only S.1111.111 as NaN and
/// FP4 has no NaN at all.
enum class Profile : std::uint8_t { ieee, finite_extended };

enum class FpClass : std::uint8_t { zero, subnormal, normal, inf, nan };

struct FormatSpec {
  Format name;
  int total_bits;
  int exp_bits;
  int man_bits;
  int bias;
  Profile profile;

  constexpr int precision() const { return man_bits + 1; }
  constexpr int emin() const { return 1 - bias; }
  constexpr int emax() const {
    const int top = (1 << exp_bits) - 1;
    return (profile == Profile::ieee ? top - 1 : top) - bias;
  }
  constexpr bool has_inf() const { return profile == Profile::ieee; }
  constexpr bool has_nan() const {
    return profile == Profile::ieee || name != Format::fp4;
  }
  /// Largest significand allowed at emax().
  constexpr std::uint32_t max_sig() const {
    const std::uint32_t all = (std::uint32_t{1} << precision()) - 1;
    return (profile == Profile::finite_extended && has_nan()) ? all - 1 : all;
  }
  constexpr std::uint32_t word_mask() const {
    return total_bits >= 32 ? 0xFFFFFFFFu : (std::uint32_t{1} << total_bits) - 1;
  }
  constexpr std::uint32_t exp_field_max() const { return (1u << exp_bits) - 1; }
  constexpr std::uint32_t man_mask() const { return (1u << man_bits) - 1; }

  friend constexpr bool operator==(const FormatSpec&, const FormatSpec&) = default;
};

inline constexpr FormatSpec kFP32{Format::fp32, 32, 8, 23, 127, Profile::ieee};
inline constexpr FormatSpec kFP16{Format::fp16, 16, 5, 10, 15, Profile::ieee};
inline constexpr FormatSpec kFP8{Format::fp8, 8, 4, 3, 7, Profile::finite_extended};
inline constexpr FormatSpec kFP8Ieee{Format::fp8, 8, 4, 3, 7, Profile::ieee};
inline constexpr FormatSpec kFP4{Format::fp4, 4, 2, 1, 1, Profile::finite_extended};

/// FP32 and FP16 are always IEEE and FP4 always finite-only; only FP8 takes
/// the selectable profile.
constexpr FormatSpec format_spec(Format f, Profile fp8_profile = Profile::finite_extended) {
  switch (f) {
    case Format::fp32: return kFP32;
    case Format::fp16: return kFP16;
    case Format::fp8: return fp8_profile == Profile::ieee ? kFP8Ieee : kFP8;
    case Format::fp4: return kFP4;
  }
  return kFP32;
}

constexpr std::string_view to_string(Format f) {
  switch (f) {
    case Format::fp32: return "fp32";
    case Format::fp16: return "fp16";
    case Format::fp8: return "fp8";
    case Format::fp4: return "fp4";
  }
  return "?";
}

inline std::optional<Format> parse_format(std::string_view s) {
  if (s == "fp32") return Format::fp32;
  if (s == "fp16") return Format::fp16;
  if (s == "fp8") return Format::fp8;
  if (s == "fp4") return Format::fp4;
  return std::nullopt;
}

struct FPValue {
  FpClass cls = FpClass::zero;
  bool sign = false;
  int exp = 0;            // unbiased exponent of the hidden-bit position
  std::uint32_t sig = 0;  // p-bit significand, hidden bit explicit

  bool is_finite() const { return cls != FpClass::inf && cls != FpClass::nan; }
  friend bool operator==(const FPValue&, const FPValue&) = default;
};

struct ExceptionFlags {
  bool invalid = false;
  bool overflow = false;
  bool underflow = false;
  bool inexact = false;

  bool any() const { return invalid || overflow || underflow || inexact; }
  ExceptionFlags& operator|=(const ExceptionFlags& o) {
    invalid |= o.invalid;
    overflow |= o.overflow;
    underflow |= o.underflow;
    inexact |= o.inexact;
    return *this;
  }
  friend bool operator==(const ExceptionFlags&, const ExceptionFlags&) = default;
};

/// Fixed i,o,u,x ordering with '-' placeholders, e.g. "--ux".
inline std::string to_string(const ExceptionFlags& f) {
  std::string s = "----";
  if (f.invalid) s[0] = 'i';
  if (f.overflow) s[1] = 'o';
  if (f.underflow) s[2] = 'u';
  if (f.inexact) s[3] = 'x';
  return s;
}

inline std::optional<ExceptionFlags> parse_flags(std::string_view s) {
  static constexpr char kSet[4] = {'i', 'o', 'u', 'x'};
  if (s.size() != 4) return std::nullopt;
  bool bits[4];
  for (int i = 0; i < 4; ++i) {
    if (s[i] == kSet[i]) {
      bits[i] = true;
    } else if (s[i] == '-') {
      bits[i] = false;
    } else {
      return std::nullopt;
    }
  }
  return ExceptionFlags{bits[0], bits[1], bits[2], bits[3]};
}

/// Packed result word together with its IEEE status.
struct Rounded {
  std::uint32_t bits = 0;
  ExceptionFlags flags;
  friend bool operator==(const Rounded&, const Rounded&) = default;
};

/// Upper bits beyond total_bits are ignored.
inline FPValue decode(const FormatSpec& fmt, std::uint32_t bits) {
  bits &= fmt.word_mask();
  FPValue v;
  v.sign = (bits >> (fmt.total_bits - 1)) & 1u;
  const std::uint32_t e = (bits >> fmt.man_bits) & fmt.exp_field_max();
  const std::uint32_t m = bits & fmt.man_mask();
  const std::uint32_t hidden = 1u << fmt.man_bits;

  if (e == fmt.exp_field_max()) {
    if (fmt.profile == Profile::ieee) {
      v.cls = m == 0 ? FpClass::inf : FpClass::nan;
      v.exp = fmt.emax() + 1;
      v.sig = m;
      return v;
    }
    if (fmt.has_nan() && m == fmt.man_mask()) {
      v.cls = FpClass::nan;
      v.exp = fmt.emax();
      v.sig = m;
      return v;
    }
  }
  if (e == 0) {
    v.cls = m == 0 ? FpClass::zero : FpClass::subnormal;
    v.exp = fmt.emin();
    v.sig = m;
    return v;
  }
  v.cls = FpClass::normal;
  v.exp = static_cast<int>(e) - fmt.bias;
  v.sig = hidden | m;
  return v;
}

inline FpClass classify(const FormatSpec& fmt, std::uint32_t bits) {
  return decode(fmt, bits).cls;
}

/// Quiet bit set, payload zero. The finite-extended FP8 profile has a single
/// NaN pattern per sign, S.1111.111.
inline std::uint32_t canonical_nan(const FormatSpec& fmt) {
  if (!fmt.has_nan()) {
    throw UnsupportedProfile(std::string(to_string(fmt.name)) + " has no NaN encoding");
  }
  if (fmt.profile == Profile::finite_extended) {
    return (fmt.exp_field_max() << fmt.man_bits) | fmt.man_mask();
  }
  return (fmt.exp_field_max() << fmt.man_bits) | (1u << (fmt.man_bits - 1));
}

inline std::uint32_t sign_bit(const FormatSpec& fmt, bool sign) {
  return sign ? (1u << (fmt.total_bits - 1)) : 0u;
}

inline std::uint32_t infinity_bits(const FormatSpec& fmt, bool sign) {
  if (!fmt.has_inf()) {
    throw UnsupportedProfile(std::string(to_string(fmt.name)) + " has no infinity");
  }
  return sign_bit(fmt, sign) | (fmt.exp_field_max() << fmt.man_bits);
}

inline std::uint32_t max_finite_bits(const FormatSpec& fmt, bool sign) {
  const auto biased = static_cast<std::uint32_t>(fmt.emax() + fmt.bias);
  return sign_bit(fmt, sign) | (biased << fmt.man_bits) | (fmt.max_sig() & fmt.man_mask());
}

inline std::uint32_t encode(const FormatSpec& fmt, const FPValue& v) {
  const std::uint32_t s = sign_bit(fmt, v.sign);
  const std::uint32_t hidden = 1u << fmt.man_bits;
  switch (v.cls) {
    case FpClass::zero:
      return s;
    case FpClass::subnormal:
      if (v.sig == 0 || v.sig >= hidden) throw std::invalid_argument("encode: bad subnormal significand");
      return s | v.sig;
    case FpClass::normal: {
      if (v.sig < hidden || v.sig >= 2 * hidden) throw std::invalid_argument("encode: bad normal significand");
      if (v.exp < fmt.emin() || v.exp > fmt.emax() || (v.exp == fmt.emax() && v.sig > fmt.max_sig())) {
        throw std::invalid_argument("encode: exponent out of range");
      }
      const auto biased = static_cast<std::uint32_t>(v.exp + fmt.bias);
      return s | (biased << fmt.man_bits) | (v.sig & fmt.man_mask());
    }
    case FpClass::inf:
      return infinity_bits(fmt, v.sign);
    case FpClass::nan:
      return canonical_nan(fmt);
  }
  return s;
}

/// Number of extra bits below the significand in a round_pack input:
/// guard, round and sticky.
inline constexpr int kGrsBits = 3;

/// Round-to-nearest-even packing. `sig_ext` holds p significand bits followed
/// by guard, round and sticky (p + 3 bits, top bit set) or is zero; its value
/// is sig_ext * 2^(exp - (p - 1) - 3).
///
/// Results below the normal range are shifted into the subnormal range before
/// rounding. Tininess is detected after rounding; the underflow flag is raised
/// only for tiny inexact results.
inline Rounded round_pack(const FormatSpec& fmt, bool sign, int exp, std::uint64_t sig_ext) {
  const int p = fmt.precision();
  const std::uint64_t top = std::uint64_t{1} << (p + kGrsBits - 1);
  Rounded out;
  if (sig_ext == 0) {
    out.bits = sign_bit(fmt, sign);
    return out;
  }
  if (sig_ext < top || sig_ext >= 2 * top) {
    throw std::invalid_argument("round_pack: significand is not normalized");
  }

  const auto rne_carries = [](std::uint64_t ext) {
    const bool lsb = (ext >> 3) & 1u;
    const bool guard = (ext >> 2) & 1u;
    const bool rest = (ext & 3u) != 0;
    return guard && (rest || lsb);
  };

  // Tiny-after-rounding: the result rounded to p bits with an unbounded
  // exponent is still below 2^emin.
  bool tiny = false;
  if (exp < fmt.emin()) {
    const bool all_ones = (sig_ext >> kGrsBits) == (top >> kGrsBits) * 2 - 1;
    const bool reaches_normal = exp == fmt.emin() - 1 && all_ones && rne_carries(sig_ext);
    tiny = !reaches_normal;

    const int d = fmt.emin() - exp;
    if (d >= 64) {
      sig_ext = 1;
    } else {
      const bool lost = (sig_ext & ((std::uint64_t{1} << d) - 1)) != 0;
      sig_ext = (sig_ext >> d) | (lost ? 1u : 0u);
    }
    exp = fmt.emin();
  }

  out.flags.inexact = (sig_ext & 7u) != 0;
  std::uint64_t sig = (sig_ext >> kGrsBits) + (rne_carries(sig_ext) ? 1u : 0u);
  if (sig == (std::uint64_t{1} << p)) {
    sig >>= 1;
    ++exp;
  }
  out.flags.underflow = tiny && out.flags.inexact;

  if (exp > fmt.emax() || (exp == fmt.emax() && sig > fmt.max_sig())) {
    out.flags.overflow = true;
    out.flags.inexact = true;
    out.bits = fmt.has_inf() ? infinity_bits(fmt, sign) : max_finite_bits(fmt, sign);
    return out;
  }

  const std::uint64_t hidden = std::uint64_t{1} << (p - 1);
  const std::uint32_t s = sign_bit(fmt, sign);
  if (sig < hidden) {
    out.bits = s | static_cast<std::uint32_t>(sig);
  } else {
    const auto biased = static_cast<std::uint32_t>(exp + fmt.bias);
    out.bits = s | (biased << fmt.man_bits) | static_cast<std::uint32_t>(sig & fmt.man_mask());
  }
  return out;
}

/// Exact conversion to double (every supported format embeds exactly).
inline double to_double(const FormatSpec& fmt, std::uint32_t bits) {
  const FPValue v = decode(fmt, bits);
  switch (v.cls) {
    case FpClass::nan:
      return std::numeric_limits<double>::quiet_NaN();
    case FpClass::inf:
      return v.sign ? -std::numeric_limits<double>::infinity()
                    : std::numeric_limits<double>::infinity();
    default: {
      const double mag = std::ldexp(static_cast<double>(v.sig), v.exp - (fmt.precision() - 1));
      return v.sign ? -mag : mag;
    }
  }
}

}  // namespace transdot
