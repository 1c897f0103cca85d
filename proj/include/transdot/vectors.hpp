// SPDX-License-Identifier: Apache-2.0
//
// Plain-text test-vector files.
//
//   transdot-vectors v1 fp8-profile=extended
//   # comments start with '#'
//   <kind> <in> <acc> <terms> <a> <b> <c> [<result> <flags>]
//
// kind is fma, simd or dpa. a and b are 32-bit packed words (8 hex digits).
// c and result are accumulator-width words for fma/dpa and 32-bit packed
// words for simd. flags is a 4-character i/o/u/x string with '-' for clear
// bits; simd records carry one group per lane, lane 0 first, joined by ':'.
// Hex digits are lowercase.
#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "transdot/datapath.hpp"
#include "transdot/error.hpp"
#include "transdot/formats.hpp"
#include "transdot/oracle.hpp"

namespace transdot::vectors {

inline constexpr std::string_view kMagic = "transdot-vectors";
inline constexpr std::string_view kVersion = "v1";

/// Malformed vector file or record; `line` is 1-based, 0 when unknown.
class FormatError : public Error {
 public:
  FormatError(std::size_t line, const std::string& what)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

inline std::string_view profile_name(Profile p) { return p == Profile::ieee ? "ieee" : "extended"; }

inline std::optional<Profile> parse_profile(std::string_view s) {
  if (s == "ieee") return Profile::ieee;
  if (s == "extended") return Profile::finite_extended;
  return std::nullopt;
}

inline std::string header_line(Profile fp8_profile) {
  return std::string(kMagic) + " " + std::string(kVersion) + " fp8-profile=" + std::string(profile_name(fp8_profile));
}

struct Outcome {
  std::uint32_t word = 0;
  std::array<ExceptionFlags, kMaxLanes> flags{};
  int lanes = 1;
  friend bool operator==(const Outcome&, const Outcome&) = default;
};

struct VectorRecord {
  OpKind kind = OpKind::fma_scalar;
  Format fmt_in = Format::fp32;
  Format fmt_acc = Format::fp32;
  int terms = 1;
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  std::uint32_t c = 0;
  std::optional<Outcome> expected;
};

/// Lanes of the result: the SIMD width for simd records, 1 otherwise.
inline int result_lanes(const VectorRecord& r, Profile p) {
  return r.kind == OpKind::fma_simd ? lanes_per_word(format_spec(r.fmt_in, p)) : 1;
}

/// Hex digits of the c and result fields.
inline int acc_digits(const VectorRecord& r) {
  if (r.kind == OpKind::fma_simd) return 8;
  return format_spec(r.fmt_acc).total_bits / 4;
}

inline std::string hex(std::uint32_t v, int digits) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(digits, '0');
  for (int i = digits - 1; i >= 0; --i, v >>= 4) s[i] = kDigits[v & 0xF];
  return s;
}

inline std::string flags_field(const Outcome& o) {
  std::string s;
  for (int i = 0; i < o.lanes; ++i) {
    if (i) s += ':';
    s += to_string(o.flags[i]);
  }
  return s;
}

inline std::string format_record(const VectorRecord& r) {
  std::string s;
  s.reserve(64);
  s += to_string(r.kind);
  s += ' ';
  s += to_string(r.fmt_in);
  s += ' ';
  s += to_string(r.fmt_acc);
  s += ' ';
  s += std::to_string(r.terms);
  s += ' ';
  s += hex(r.a, 8);
  s += ' ';
  s += hex(r.b, 8);
  s += ' ';
  s += hex(r.c, acc_digits(r));
  if (r.expected) {
    s += ' ';
    s += hex(r.expected->word, acc_digits(r));
    s += ' ';
    s += flags_field(*r.expected);
  }
  return s;
}

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::optional<std::uint32_t> parse_hex_exact(std::string_view s, int digits) {
  if (static_cast<int>(s.size()) != digits) return std::nullopt;
  std::uint32_t v = 0;
  for (char ch : s) {
    int d;
    if (ch >= '0' && ch <= '9') {
      d = ch - '0';
    } else if (ch >= 'a' && ch <= 'f') {
      d = ch - 'a' + 10;
    } else {
      return std::nullopt;
    }
    v = (v << 4) | static_cast<std::uint32_t>(d);
  }
  return v;
}

inline std::optional<OpKind> parse_kind(std::string_view s) {
  if (s == "fma") return OpKind::fma_scalar;
  if (s == "simd") return OpKind::fma_simd;
  if (s == "dpa") return OpKind::dpa;
  return std::nullopt;
}

}  // namespace detail

/// Parses the header line and returns the FP8 profile it declares.
inline Profile parse_header(std::string_view line, std::size_t line_no = 1) {
  const auto tok = detail::split_ws(line);
  if (tok.size() < 2 || tok[0] != kMagic) throw FormatError(line_no, "missing '" + std::string(kMagic) + "' header");
  if (tok[1] != kVersion) throw FormatError(line_no, "unsupported format version '" + std::string(tok[1]) + "'");
  Profile p = Profile::finite_extended;
  for (std::size_t i = 2; i < tok.size(); ++i) {
    constexpr std::string_view key = "fp8-profile=";
    if (tok[i].substr(0, key.size()) != key) throw FormatError(line_no, "unknown header field '" + std::string(tok[i]) + "'");
    const auto prof = parse_profile(tok[i].substr(key.size()));
    if (!prof) throw FormatError(line_no, "unknown fp8 profile '" + std::string(tok[i]) + "'");
    p = *prof;
  }
  return p;
}

inline VectorRecord parse_record(std::string_view line, Profile profile, std::size_t line_no = 0) {
  const auto tok = detail::split_ws(line);
  if (tok.size() != 7 && tok.size() != 9) {
    throw FormatError(line_no, "expected 7 or 9 fields, got " + std::to_string(tok.size()));
  }
  VectorRecord r;
  const auto kind = detail::parse_kind(tok[0]);
  if (!kind) throw FormatError(line_no, "unknown kind '" + std::string(tok[0]) + "'");
  const auto in = parse_format(tok[1]);
  const auto acc = parse_format(tok[2]);
  if (!in) throw FormatError(line_no, "unknown input format '" + std::string(tok[1]) + "'");
  if (!acc) throw FormatError(line_no, "unknown accumulator format '" + std::string(tok[2]) + "'");
  int terms = 0;
  const auto [ptr, ec] = std::from_chars(tok[3].data(), tok[3].data() + tok[3].size(), terms);
  if (ec != std::errc() || ptr != tok[3].data() + tok[3].size()) {
    throw FormatError(line_no, "malformed terms '" + std::string(tok[3]) + "'");
  }
  r.kind = *kind;
  r.fmt_in = *in;
  r.fmt_acc = *acc;
  r.terms = terms;
  if (!is_supported(r.kind, format_spec(r.fmt_in, profile), format_spec(r.fmt_acc, profile), r.terms)) {
    throw FormatError(line_no, "unsupported mode '" + std::string(tok[0]) + " " + std::string(tok[1]) + " " +
                                   std::string(tok[2]) + " " + std::string(tok[3]) + "'");
  }
  const int cd = acc_digits(r);
  const auto a = detail::parse_hex_exact(tok[4], 8);
  const auto b = detail::parse_hex_exact(tok[5], 8);
  const auto c = detail::parse_hex_exact(tok[6], cd);
  if (!a) throw FormatError(line_no, "malformed a word '" + std::string(tok[4]) + "'");
  if (!b) throw FormatError(line_no, "malformed b word '" + std::string(tok[5]) + "'");
  if (!c) throw FormatError(line_no, "malformed c word '" + std::string(tok[6]) + "' (want " + std::to_string(cd) + " hex digits)");
  r.a = *a;
  r.b = *b;
  r.c = *c;
  if (tok.size() == 9) {
    Outcome e;
    e.lanes = result_lanes(r, profile);
    const auto w = detail::parse_hex_exact(tok[7], cd);
    if (!w) throw FormatError(line_no, "malformed result word '" + std::string(tok[7]) + "'");
    e.word = *w;
    std::string_view fs = tok[8];
    for (int i = 0; i < e.lanes; ++i) {
      const auto f = parse_flags(fs.substr(0, 4));
      if (!f) throw FormatError(line_no, "malformed flags '" + std::string(tok[8]) + "'");
      e.flags[i] = *f;
      fs.remove_prefix(std::min<std::size_t>(4, fs.size()));
      if (i + 1 < e.lanes) {
        if (fs.empty() || fs[0] != ':') throw FormatError(line_no, "expected " + std::to_string(e.lanes) + " flag groups");
        fs.remove_prefix(1);
      }
    }
    if (!fs.empty()) throw FormatError(line_no, "trailing characters in flags '" + std::string(tok[8]) + "'");
    r.expected = e;
  }
  return r;
}

inline OpRequest to_request(const VectorRecord& r, Profile p) {
  return OpRequest{r.kind, format_spec(r.fmt_in, p), format_spec(r.fmt_acc, p), r.a, r.b, r.c, r.terms};
}

inline Outcome run_datapath(const VectorRecord& r, Profile p) {
  const OpResult res = execute(to_request(r, p));
  Outcome o;
  o.word = res.result_word;
  o.lanes = res.lanes;
  o.flags = res.flags;
  return o;
}

inline Outcome run_oracle(const VectorRecord& r, Profile p) {
  const FormatSpec in = format_spec(r.fmt_in, p);
  const FormatSpec acc = format_spec(r.fmt_acc, p);
  Outcome o;
  switch (r.kind) {
    case OpKind::fma_scalar: {
      const auto x = oracle::oracle_fma(in, acc, r.a & in.word_mask(), r.b & in.word_mask(), r.c);
      o.word = x.bits;
      o.flags[0] = x.flags;
      break;
    }
    case OpKind::fma_simd: {
      const auto lanes = oracle::oracle_simd_fma(in, r.a, r.b, r.c);
      o.lanes = static_cast<int>(lanes.size());
      for (int i = 0; i < o.lanes; ++i) {
        o.word |= lanes[i].bits << (i * in.total_bits);
        o.flags[i] = lanes[i].flags;
      }
      break;
    }
    case OpKind::dpa: {
      const auto x = oracle::oracle_dpa(in, acc, r.a, r.b, r.c);
      o.word = x.bits;
      o.flags[0] = x.flags;
      break;
    }
  }
  return o;
}

// ---------------------------------------------------------------------------
// Parallel helpers

/// Worker count from TRANSDOT_JOBS, defaulting to the processor count.
inline int default_jobs() {
  if (const char* env = std::getenv("TRANSDOT_JOBS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

/// Runs fn(i) for i in [0, n) on `jobs` threads, in contiguous blocks.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max(1, std::min<int>(jobs, static_cast<int>(std::max<std::size_t>(1, n / 256))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t block = (n + jobs - 1) / jobs;
  for (int t = 0; t < jobs; ++t) {
    const std::size_t lo = t * block;
    const std::size_t hi = std::min(n, lo + block);
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------------------
// Generation

struct Mode {
  OpKind kind = OpKind::fma_scalar;
  Format in = Format::fp32;
  Format acc = Format::fp32;
  int terms = 1;
};

/// Mode names: <fmt>-fma, <fmt>-simd[k], <fmt>-dpa[k]; e.g. fp8-fma, fp16-simd2,
/// fp4-dpa8. `acc` picks the DPA accumulator.
inline std::optional<Mode> parse_mode(std::string_view name, Format acc = Format::fp32) {
  const auto dash = name.find('-');
  if (dash == std::string_view::npos) return std::nullopt;
  const auto in = parse_format(name.substr(0, dash));
  if (!in) return std::nullopt;
  std::string_view op = name.substr(dash + 1);
  Mode m;
  m.in = *in;
  const FormatSpec spec = format_spec(*in);
  std::string_view digits;
  if (op == "fma") {
    m.kind = OpKind::fma_scalar;
  } else if (op.substr(0, 4) == "simd") {
    m.kind = OpKind::fma_simd;
    digits = op.substr(4);
  } else if (op.substr(0, 3) == "dpa") {
    m.kind = OpKind::dpa;
    digits = op.substr(3);
  } else {
    return std::nullopt;
  }
  m.terms = terms_for(m.kind, spec);
  if (!digits.empty()) {
    int k = 0;
    const auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
    if (ec != std::errc() || p != digits.data() + digits.size() || k != m.terms) return std::nullopt;
  }
  m.acc = m.kind == OpKind::dpa ? acc : m.in;
  if (!is_supported(m.kind, spec, format_spec(m.acc), m.terms)) return std::nullopt;
  return m;
}

inline std::string mode_name(const Mode& m) {
  std::string s(to_string(m.in));
  switch (m.kind) {
    case OpKind::fma_scalar: return s + "-fma";
    case OpKind::fma_simd: return s + "-simd" + std::to_string(m.terms);
    case OpKind::dpa: return s + "-dpa" + std::to_string(m.terms);
  }
  return s;
}

/// log2 of the number of distinct (a, b, c) inputs of a mode.
inline int input_space_bits(const Mode& m) {
  const int w_in = format_spec(m.in).total_bits;
  const int w_acc = format_spec(m.acc).total_bits;
  switch (m.kind) {
    case OpKind::fma_scalar: return 2 * w_in + w_acc;
    case OpKind::fma_simd: return 96;
    case OpKind::dpa: return 2 * w_in * m.terms + w_acc;
  }
  return 96;
}

inline constexpr int kMaxExhaustiveBits = 26;

enum class Strategy : std::uint8_t { random, corners, exhaustive };

inline std::optional<Strategy> parse_strategy(std::string_view s) {
  if (s == "random") return Strategy::random;
  if (s == "corners") return Strategy::corners;
  if (s == "exhaustive") return Strategy::exhaustive;
  return std::nullopt;
}

/// Boundary encodings: +-0, +-min subnormal, +-max subnormal, +-min normal,
/// +-max finite, +-1, plus NaN and +-INF where the profile has them.
/// Duplicates (FP4's single subnormal, 1.0 == min normal) appear once.
inline std::vector<std::uint32_t> corner_values(const FormatSpec& f) {
  const std::uint32_t min_normal = 1u << f.man_bits;
  const std::uint32_t one = static_cast<std::uint32_t>(f.bias) << f.man_bits;
  const std::uint32_t mags[] = {0u, 1u, f.man_mask(), min_normal, max_finite_bits(f, false), one};
  std::vector<std::uint32_t> out;
  for (bool neg : {false, true}) {
    for (std::uint32_t m : mags) {
      const std::uint32_t v = m | sign_bit(f, neg);
      if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    }
  }
  if (f.has_nan()) out.push_back(canonical_nan(f));
  if (f.has_inf()) {
    out.push_back(infinity_bits(f, false));
    out.push_back(infinity_bits(f, true));
  }
  return out;
}

namespace detail {

inline std::uint32_t pack_lanes(const FormatSpec& f, std::span<const std::uint32_t> lanes) {
  std::uint32_t w = 0;
  for (std::size_t i = 0; i < lanes.size(); ++i) w |= (lanes[i] & f.word_mask()) << (i * f.total_bits);
  return w;
}

/// Nearest representable encoding of a finite double.
inline std::uint32_t encode_nearest(const FormatSpec& f, double x) {
  if (x == 0) return sign_bit(f, std::signbit(x));
  int e = 0;
  const double m = std::frexp(std::fabs(x), &e);  // [0.5, 1)
  const auto bits53 = static_cast<std::uint64_t>(std::ldexp(m, 53));
  const int drop = 53 - (f.precision() + 2);
  const std::uint64_t head = bits53 >> drop;
  const bool rest = (bits53 & ((std::uint64_t{1} << drop) - 1)) != 0;
  return round_pack(f, std::signbit(x), e - 1, (head << 1) | (rest ? 1u : 0u)).bits;
}

/// Operand sampler mixing uniform bit patterns, exponent-clustered values
/// and cancellation-prone constructions.
class Sampler {
 public:
  Sampler(const Mode& m, Profile p, std::uint64_t seed)
      : mode_(m), in_(format_spec(m.in, p)), acc_(format_spec(m.acc, p)), rng_(seed),
        in_corners_(corner_values(in_)), acc_corners_(corner_values(acc_)) {}

  VectorRecord next() {
    const int k = mode_.kind == OpKind::fma_scalar ? 1 : lanes_per_word(in_);
    std::array<std::uint32_t, 8> a{}, b{}, c{};
    const unsigned pick = rng_() % 8;
    if (mode_.kind == OpKind::dpa) {
      for (int i = 0; i < k; ++i) {
        a[i] = draw(in_, pick, i);
        b[i] = draw(in_, pick, i);
      }
      if (pick == 6 && k >= 2) {
        // Mirror half of the products with the opposite sign.
        for (int i = 0; i + 1 < k; i += 2) {
          a[i + 1] = a[i];
          b[i + 1] = b[i] ^ sign_bit(in_, true);
        }
        if (rng_() & 1) b[k - 1] = random_finite(in_);
      }
      c[0] = make_c(pick, std::span(a.data(), k), std::span(b.data(), k));
    } else {
      for (int i = 0; i < k; ++i) {
        a[i] = draw(in_, pick, i);
        b[i] = draw(in_, pick, i);
        c[i] = make_c(pick, std::span(a.data() + i, 1), std::span(b.data() + i, 1));
      }
    }
    VectorRecord r;
    r.kind = mode_.kind;
    r.fmt_in = mode_.in;
    r.fmt_acc = mode_.acc;
    r.terms = mode_.terms;
    if (mode_.kind == OpKind::fma_scalar) {
      r.a = a[0];
      r.b = b[0];
      r.c = c[0];
    } else {
      r.a = pack_lanes(in_, std::span(a.data(), k));
      r.b = pack_lanes(in_, std::span(b.data(), k));
      r.c = mode_.kind == OpKind::fma_simd ? pack_lanes(in_, std::span(c.data(), k)) : c[0];
    }
    return r;
  }

 private:
  std::uint32_t bits(const FormatSpec& f) { return static_cast<std::uint32_t>(rng_()) & f.word_mask(); }

  std::uint32_t random_finite(const FormatSpec& f) {
    for (;;) {
      const std::uint32_t v = bits(f);
      if (decode(f, v).is_finite()) return v;
    }
  }

  // Finite value with biased exponent within +-spread of `center`.
  std::uint32_t clustered(const FormatSpec& f, int center, int spread) {
    const int lo = 0;
    const int hi = static_cast<int>(f.exp_field_max()) - (f.profile == Profile::ieee ? 1 : 0);
    const int e = std::clamp(center + static_cast<int>(rng_() % (2 * spread + 1)) - spread, lo, hi);
    std::uint32_t v = sign_bit(f, rng_() & 1) | (static_cast<std::uint32_t>(e) << f.man_bits) |
                      (static_cast<std::uint32_t>(rng_()) & f.man_mask());
    if (!decode(f, v).is_finite()) v = max_finite_bits(f, v >> (f.total_bits - 1));
    return v;
  }

  std::uint32_t draw(const FormatSpec& f, unsigned pick, int lane) {
    switch (pick) {
      case 0:
      case 1:
      case 2:
        return bits(f);
      case 7:
        return (rng_() % 3 == 0) ? in_corners_[rng_() % in_corners_.size()] : bits(f);
      default: {
        if (lane == 0) center_ = static_cast<int>(rng_() % (f.exp_field_max() + 1));
        return clustered(f, center_, 2);
      }
    }
  }

  std::uint32_t make_c(unsigned pick, std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
    if (pick <= 2) return bits(acc_);
    if (pick == 7) return (rng_() & 1) ? acc_corners_[rng_() % acc_corners_.size()] : bits(acc_);
    // Aim c at the (approximate) negated product sum, then nudge by a few
    // ulps so that the exact sum lands near a rounding boundary.
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double x = to_double(in_, a[i]) * to_double(in_, b[i]);
      if (!std::isfinite(x)) return bits(acc_);
      s += x;
    }
    if (!std::isfinite(s)) return bits(acc_);
    double target = (rng_() % 4 == 0) ? s : -s;
    if (rng_() % 5 == 0) target = std::ldexp(target, -static_cast<int>(rng_() % 40));
    if (std::fabs(target) > to_double(acc_, max_finite_bits(acc_, false))) return bits(acc_);
    std::uint32_t c = encode_nearest(acc_, target);
    const int nudge = static_cast<int>(rng_() % 7) - 3;
    const std::uint32_t mag = c & ~sign_bit(acc_, true);
    const auto moved = static_cast<std::int64_t>(mag) + nudge;
    if (moved >= 0 && decode(acc_, static_cast<std::uint32_t>(moved)).is_finite()) {
      c = (c & sign_bit(acc_, true)) | static_cast<std::uint32_t>(moved);
    }
    return c;
  }

  Mode mode_;
  FormatSpec in_;
  FormatSpec acc_;
  std::mt19937_64 rng_;
  std::vector<std::uint32_t> in_corners_;
  std::vector<std::uint32_t> acc_corners_;
  int center_ = 0;
};

// Greedy pairwise covering array: every value pair of every slot pair appears
// in some row. Deterministic.
inline std::vector<std::vector<std::size_t>> pairwise_rows(const std::vector<std::size_t>& sizes) {
  const std::size_t n = sizes.size();
  std::vector<std::vector<std::vector<bool>>> covered(n);
  std::size_t remaining = 0;
  for (std::size_t s = 0; s < n; ++s) {
    covered[s].resize(n);
    for (std::size_t t = s + 1; t < n; ++t) {
      covered[s][t].assign(sizes[s] * sizes[t], false);
      remaining += sizes[s] * sizes[t];
    }
  }
  std::vector<std::vector<std::size_t>> rows;
  while (remaining > 0) {
    std::vector<std::size_t> row(n, 0);
    // Seed the row with the first uncovered pair.
    bool seeded = false;
    for (std::size_t s = 0; s < n && !seeded; ++s)
      for (std::size_t t = s + 1; t < n && !seeded; ++t)
        for (std::size_t idx = 0; idx < covered[s][t].size() && !seeded; ++idx)
          if (!covered[s][t][idx]) {
            row[s] = idx / sizes[t];
            row[t] = idx % sizes[t];
            seeded = true;
          }
    std::vector<bool> fixed(n, false);
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t t = s + 1; t < n; ++t)
        if (!fixed[s] && !fixed[t]) {
          const std::size_t idx = row[s] * sizes[t] + row[t];
          if (!covered[s][t][idx] && (row[s] | row[t]) != 0) {
            fixed[s] = fixed[t] = true;
          }
        }
    if (!std::any_of(fixed.begin(), fixed.end(), [](bool f) { return f; })) {
      // The seed pair was (0, 0); find and fix it.
      for (std::size_t s = 0; s < n; ++s)
        for (std::size_t t = s + 1; t < n; ++t)
          if (!fixed[s] && !fixed[t] && !covered[s][t][row[s] * sizes[t] + row[t]]) fixed[s] = fixed[t] = true;
    }
    for (std::size_t s = 0; s < n; ++s) {
      if (fixed[s]) continue;
      std::size_t best = 0;
      long best_gain = -1;
      for (std::size_t v = 0; v < sizes[s]; ++v) {
        long gain = 0;
        for (std::size_t t = 0; t < n; ++t) {
          if (t == s || !fixed[t]) continue;
          const bool hit = s < t ? !covered[s][t][v * sizes[t] + row[t]] : !covered[t][s][row[t] * sizes[s] + v];
          gain += hit ? 1 : 0;
        }
        if (gain > best_gain) {
          best_gain = gain;
          best = v;
        }
      }
      row[s] = best;
      fixed[s] = true;
    }
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t t = s + 1; t < n; ++t) {
        auto cell = covered[s][t][row[s] * sizes[t] + row[t]];
        if (!cell) {
          covered[s][t][row[s] * sizes[t] + row[t]] = true;
          --remaining;
        }
      }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

inline constexpr std::size_t kFullCrossLimit = std::size_t{1} << 20;

/// Corner-case records for a mode (operands only):
///  - the full cross product over every operand slot when it has at most
///    2^20 elements (scalar FMA, SIMD FMA lane triples, 2-term DPA);
///  - otherwise the cross product of (a, b, c) at every term position with
///    the other terms zero, the cross product over two term positions
///    (first and last) plus c, and a pairwise covering array over all slots.
inline std::vector<VectorRecord> corner_records(const Mode& m, Profile p) {
  const FormatSpec in = format_spec(m.in, p);
  const FormatSpec acc = format_spec(m.acc, p);
  const auto cin = corner_values(in);
  const auto cacc = corner_values(acc);
  const std::size_t vi = cin.size();
  const std::size_t va = cacc.size();
  std::vector<VectorRecord> out;
  auto base = [&] {
    VectorRecord r;
    r.kind = m.kind;
    r.fmt_in = m.in;
    r.fmt_acc = m.acc;
    r.terms = m.terms;
    return r;
  };

  if (m.kind == OpKind::fma_scalar) {
    for (auto a : cin)
      for (auto b : cin)
        for (auto c : cacc) {
          VectorRecord r = base();
          r.a = a;
          r.b = b;
          r.c = c;
          out.push_back(r);
        }
    return out;
  }
  if (m.kind == OpKind::fma_simd) {
    const std::size_t triples = vi * vi * vi;
    const int k = m.terms;
    for (std::size_t j = 0; j < triples; ++j) {
      std::array<std::uint32_t, 4> a{}, b{}, c{};
      for (int i = 0; i < k; ++i) {
        const std::size_t t = (j + i * (triples / k + 1)) % triples;
        a[i] = cin[t / (vi * vi)];
        b[i] = cin[(t / vi) % vi];
        c[i] = cin[t % vi];
      }
      VectorRecord r = base();
      r.a = detail::pack_lanes(in, std::span(a.data(), k));
      r.b = detail::pack_lanes(in, std::span(b.data(), k));
      r.c = detail::pack_lanes(in, std::span(c.data(), k));
      out.push_back(r);
    }
    return out;
  }

  const int k = m.terms;
  const std::size_t zero_in = 0;  // +0 is the first corner value
  auto emit = [&](const std::array<std::size_t, 8>& ai, const std::array<std::size_t, 8>& bi, std::size_t ci) {
    std::array<std::uint32_t, 8> a{}, b{};
    for (int i = 0; i < k; ++i) {
      a[i] = cin[ai[i]];
      b[i] = cin[bi[i]];
    }
    VectorRecord r = base();
    r.a = detail::pack_lanes(in, std::span(a.data(), k));
    r.b = detail::pack_lanes(in, std::span(b.data(), k));
    r.c = cacc[ci];
    out.push_back(r);
  };

  double full = static_cast<double>(va);
  for (int i = 0; i < 2 * k; ++i) full *= static_cast<double>(vi);
  if (full <= static_cast<double>(kFullCrossLimit)) {
    std::vector<std::size_t> digit(2 * k + 1, 0);
    for (;;) {
      std::array<std::size_t, 8> ai{}, bi{};
      for (int i = 0; i < k; ++i) {
        ai[i] = digit[2 * i];
        bi[i] = digit[2 * i + 1];
      }
      emit(ai, bi, digit[2 * k]);
      std::size_t pos = 0;
      while (pos < digit.size()) {
        const std::size_t lim = pos == digit.size() - 1 ? va : vi;
        if (++digit[pos] < lim) break;
        digit[pos++] = 0;
      }
      if (pos == digit.size()) break;
    }
    return out;
  }

  for (int t = 0; t < k; ++t)
    for (std::size_t x = 0; x < vi; ++x)
      for (std::size_t y = 0; y < vi; ++y)
        for (std::size_t z = 0; z < va; ++z) {
          std::array<std::size_t, 8> ai{}, bi{};
          ai.fill(zero_in);
          bi.fill(zero_in);
          ai[t] = x;
          bi[t] = y;
          emit(ai, bi, z);
        }
  for (std::size_t x0 = 0; x0 < vi; ++x0)
    for (std::size_t y0 = 0; y0 < vi; ++y0)
      for (std::size_t x1 = 0; x1 < vi; ++x1)
        for (std::size_t y1 = 0; y1 < vi; ++y1)
          for (std::size_t z = 0; z < va; ++z) {
            std::array<std::size_t, 8> ai{}, bi{};
            ai[0] = x0;
            bi[0] = y0;
            ai[k - 1] = x1;
            bi[k - 1] = y1;
            emit(ai, bi, z);
          }
  std::vector<std::size_t> sizes(2 * k, vi);
  sizes.push_back(va);
  for (const auto& row : detail::pairwise_rows(sizes)) {
    std::array<std::size_t, 8> ai{}, bi{};
    for (int i = 0; i < k; ++i) {
      ai[i] = row[2 * i];
      bi[i] = row[2 * i + 1];
    }
    emit(ai, bi, row[2 * k]);
  }
  return out;
}

struct GenOptions {
  Mode mode;
  Strategy strategy = Strategy::random;
  std::uint64_t count = 1000;
  std::uint64_t seed = 1;
  Profile fp8_profile = Profile::finite_extended;
  int jobs = 1;
};

/// Writes a complete vector file with oracle-computed expectations.
/// Throws std::invalid_argument for an oversized exhaustive request.
inline std::uint64_t generate(const GenOptions& opt, std::ostream& os) {
  const Mode& m = opt.mode;
  const Profile p = opt.fp8_profile;
  if (opt.strategy == Strategy::exhaustive && input_space_bits(m) > kMaxExhaustiveBits) {
    throw std::invalid_argument("exhaustive generation of " + mode_name(m) + " needs 2^" +
                                std::to_string(input_space_bits(m)) + " records; the limit is 2^" +
                                std::to_string(kMaxExhaustiveBits));
  }
  os << header_line(p) << '\n';
  os << "# mode=" << mode_name(m) << " acc=" << to_string(m.acc) << " strategy="
     << (opt.strategy == Strategy::random ? "random" : opt.strategy == Strategy::corners ? "corners" : "exhaustive");
  if (opt.strategy == Strategy::random) os << " seed=" << opt.seed << " count=" << opt.count;
  os << '\n';

  std::vector<VectorRecord> corners;
  std::uint64_t total = 0;
  if (opt.strategy == Strategy::random) {
    total = opt.count;
  } else if (opt.strategy == Strategy::corners) {
    corners = corner_records(m, p);
    total = corners.size();
  } else {
    total = std::uint64_t{1} << input_space_bits(m);
  }

  detail::Sampler sampler(m, p, opt.seed);
  const FormatSpec in = format_spec(m.in, p);
  const int w_in = in.total_bits;
  const int w_acc = format_spec(m.acc, p).total_bits;

  constexpr std::size_t kChunk = 1 << 16;
  std::vector<VectorRecord> chunk;
  std::vector<std::string> lines;
  for (std::uint64_t start = 0; start < total; start += kChunk) {
    const std::size_t n = static_cast<std::size_t>(std::min<std::uint64_t>(kChunk, total - start));
    chunk.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint64_t idx = start + i;
      switch (opt.strategy) {
        case Strategy::random:
          chunk[i] = sampler.next();
          break;
        case Strategy::corners:
          chunk[i] = corners[idx];
          break;
        case Strategy::exhaustive: {
          // Only scalar FMA spaces fit the limit: a outermost, c innermost.
          VectorRecord r;
          r.kind = m.kind;
          r.fmt_in = m.in;
          r.fmt_acc = m.acc;
          r.terms = m.terms;
          r.c = static_cast<std::uint32_t>(idx & ((std::uint64_t{1} << w_acc) - 1));
          r.b = static_cast<std::uint32_t>((idx >> w_acc) & ((std::uint64_t{1} << w_in) - 1));
          r.a = static_cast<std::uint32_t>(idx >> (w_acc + w_in));
          chunk[i] = r;
          break;
        }
      }
    }
    lines.assign(n, {});
    parallel_for(n, opt.jobs, [&](std::size_t i) {
      chunk[i].expected = run_oracle(chunk[i], p);
      lines[i] = format_record(chunk[i]);
    });
    for (const auto& l : lines) os << l << '\n';
  }
  return total;
}

// ---------------------------------------------------------------------------
// Checking

struct Mismatch {
  std::size_t line = 0;
  VectorRecord record;
  Outcome got;
};

struct CheckSummary {
  std::size_t records = 0;
  std::size_t passed = 0;
  std::size_t failed = 0;
  std::size_t unchecked = 0;
  Profile profile = Profile::finite_extended;  // from the file header
  std::vector<Mismatch> first_mismatches;  // in file order
};

/// Runs the datapath over every record and compares result word and flags
/// bit-exactly. Throws FormatError on malformed input.
inline CheckSummary check(std::istream& is, int jobs = 1, std::size_t keep_mismatches = 10) {
  CheckSummary sum;
  std::string line;
  std::size_t line_no = 0;
  std::optional<Profile> profile;

  std::vector<VectorRecord> batch;
  std::vector<std::size_t> batch_lines;
  std::vector<Outcome> got;
  auto flush = [&] {
    got.assign(batch.size(), {});
    parallel_for(batch.size(), jobs, [&](std::size_t i) { got[i] = run_datapath(batch[i], *profile); });
    for (std::size_t i = 0; i < batch.size(); ++i) {
      ++sum.records;
      if (!batch[i].expected) {
        ++sum.unchecked;
      } else if (got[i] == *batch[i].expected) {
        ++sum.passed;
      } else {
        ++sum.failed;
        if (sum.first_mismatches.size() < keep_mismatches) {
          sum.first_mismatches.push_back({batch_lines[i], batch[i], got[i]});
        }
      }
    }
    batch.clear();
    batch_lines.clear();
  };

  while (std::getline(is, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    if (!profile) {
      profile = parse_header(line, line_no);
      continue;
    }
    batch.push_back(parse_record(line, *profile, line_no));
    batch_lines.push_back(line_no);
    if (batch.size() >= (1u << 16)) flush();
  }
  if (!profile) throw FormatError(line_no ? line_no : 1, "missing '" + std::string(kMagic) + "' header");
  sum.profile = *profile;
  flush();
  return sum;
}

/// Decimal rendering of every lane of a result word.
inline std::string describe(const FormatSpec& f, std::uint32_t word, int lanes) {
  std::ostringstream os;
  for (int i = 0; i < lanes; ++i) {
    if (i) os << ',';
    const double v = to_double(f, lanes_per_word(f) > 1 && lanes > 1 ? lane_of(word, f.total_bits, i) : word);
    if (std::isnan(v)) {
      os << "nan";
    } else if (std::isinf(v)) {
      os << (v < 0 ? "-inf" : "inf");
    } else {
      char buf[64];
      const auto res = std::to_chars(buf, buf + sizeof buf, v);
      os << std::string_view(buf, res.ptr - buf);
    }
  }
  return os.str();
}

}  // namespace transdot::vectors
