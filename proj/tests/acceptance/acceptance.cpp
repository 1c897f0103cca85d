// SPDX-License-Identifier: Apache-2.0
// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// TRANSDOT_JOBS sets the worker count.
#include <algorithm>
#include <array>
#include <atomic>
#include <cfenv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <iostream>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "support/reference.hpp"
#include "transdot/costmodel.hpp"
#include "transdot/datapath.hpp"
#include "transdot/fp4dp2.hpp"
#include "transdot/multiplier.hpp"
#include "transdot/oracle.hpp"
#include "transdot/shifter.hpp"
#include "transdot/vectors.hpp"

namespace {

using namespace transdot;
using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = true;
  std::string detail;
};

// Counts failures across workers and remembers the first one.
class Failures {
 public:
  void add(const std::string& what) {
    if (count_.fetch_add(1) == 0) {
      std::lock_guard lock(mu_);
      first_ = what;
    }
  }
  std::uint64_t count() const { return count_.load(); }
  std::string first() const {
    std::lock_guard lock(mu_);
    return first_;
  }

 private:
  std::atomic<std::uint64_t> count_{0};
  mutable std::mutex mu_;
  std::string first_;
};

std::string hexs(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%x", v);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

const int kJobs = vectors::default_jobs();

// ---------------------------------------------------------------------------

Verdict exhaustive_fp8_fma() {
  const auto t0 = Clock::now();
  Failures bad;
  vectors::parallel_for(256, kJobs, [&](std::size_t a) {
    OpRequest req;
    req.kind = OpKind::fma_scalar;
    req.fmt_in = kFP8;
    req.fmt_acc = kFP8;
    req.a_word = static_cast<std::uint32_t>(a);
    for (std::uint32_t b = 0; b < 256; ++b) {
      req.b_word = b;
      for (std::uint32_t c = 0; c < 256; ++c) {
        req.c_word = c;
        const OpResult got = execute(req);
        const Rounded want = oracle::oracle_fma(kFP8, kFP8, req.a_word, b, c);
        if (got.result_word != want.bits || got.flags[0] != want.flags) {
          bad.add("a=" + hexs(req.a_word) + " b=" + hexs(b) + " c=" + hexs(c) + " got " + hexs(got.result_word) +
                  " " + to_string(got.flags[0]) + " want " + hexs(want.bits) + " " + to_string(want.flags));
        }
      }
    }
  });
  const double secs = seconds_since(t0);
  Verdict v;
  v.pass = bad.count() == 0 && secs <= 600.0;
  v.detail = "16777216 triples, " + std::to_string(bad.count()) + " mismatches, " + fixed(secs, 1) + " s (limit 600 s)";
  if (bad.count()) v.detail += "; first: " + bad.first();
  return v;
}

Verdict exhaustive_fp4_dp2() {
  std::uint64_t mismatches = 0;
  std::uint32_t widest = 0;
  std::string first;
  for (std::uint32_t t = 0; t < (1u << 16); ++t) {
    const auto a0 = static_cast<std::uint8_t>(t & 0xF);
    const auto b0 = static_cast<std::uint8_t>((t >> 4) & 0xF);
    const auto a1 = static_cast<std::uint8_t>((t >> 8) & 0xF);
    const auto b1 = static_cast<std::uint8_t>(t >> 12);
    const fp4::Dp2Result r = fp4::dp2(a0, b0, a1, b1);
    using namespace oracle;
    const ExactNum want = exact_add(exact_mul(exact_of(kFP4, a0), exact_of(kFP4, b0)),
                                    exact_mul(exact_of(kFP4, a1), exact_of(kFP4, b1)));
    const ExactNum got = make_exact(r.sign, BigInt(r.magnitude), r.exp - (fp4::kDp2MagnitudeBits - 1));
    const bool fits = r.magnitude < (1u << 9);
    if (!(got == want) || !fits) {
      if (!mismatches++) first = "tuple " + hexs(t);
    }
    widest = std::max<std::uint32_t>(widest, r.magnitude);
  }
  Verdict v;
  v.pass = mismatches == 0;
  v.detail = "65536 tuples, " + std::to_string(mismatches) + " mismatches, widest magnitude " + std::to_string(widest) +
             " (9-bit limit 511)";
  if (mismatches) v.detail += "; first: " + first;
  return v;
}

// Datapath against oracle, record by record.
void compare_records(const std::vector<vectors::VectorRecord>& recs, Profile p, Failures& bad) {
  vectors::parallel_for(recs.size(), kJobs, [&](std::size_t i) {
    const auto got = vectors::run_datapath(recs[i], p);
    const auto want = vectors::run_oracle(recs[i], p);
    if (!(got == want)) {
      auto r = recs[i];
      r.expected = want;
      bad.add(vectors::format_record(r) + " got " + vectors::hex(got.word, 8) + " " + vectors::flags_field(got));
    }
  });
}

const char* kDpaModes[] = {"fp16-dpa2", "fp8-dpa4", "fp4-dpa8"};

Verdict dpa_oracle_equivalence() {
  constexpr std::uint64_t kRandom = 10'000'000;
  constexpr std::size_t kChunk = 1 << 16;
  const auto t0 = Clock::now();
  Verdict v;
  std::ostringstream detail;
  std::uint64_t seed = 2024;
  for (const char* name : kDpaModes) {
    for (Format acc : {Format::fp32, Format::fp16}) {
      const vectors::Mode m = vectors::parse_mode(name, acc).value();
      const Profile p = Profile::finite_extended;
      Failures bad;
      vectors::detail::Sampler sampler(m, p, seed++);
      std::vector<vectors::VectorRecord> chunk(kChunk);
      for (std::uint64_t done = 0; done < kRandom; done += kChunk) {
        chunk.resize(static_cast<std::size_t>(std::min<std::uint64_t>(kChunk, kRandom - done)));
        for (auto& r : chunk) r = sampler.next();
        compare_records(chunk, p, bad);
      }
      const auto corners = vectors::corner_records(m, p);
      compare_records(corners, p, bad);
      detail << (detail.tellp() == 0 ? "" : "; ") << vectors::mode_name(m) << "->"
             << to_string(acc) << " " << kRandom << "+" << corners.size() << " corners: " << bad.count() << " bad";
      if (bad.count()) {
        v.pass = false;
        detail << " (first: " << bad.first() << ")";
      }
    }
  }
  v.detail = detail.str() + "; " + fixed(seconds_since(t0), 1) + " s";
  return v;
}

Verdict permutation_invariance() {
  constexpr int kVectors = 100'000;
  constexpr int kPerms = 10;
  Verdict v;
  std::ostringstream detail;
  std::uint64_t seed = 77;
  for (const char* name : kDpaModes) {
    for (Format acc : {Format::fp32, Format::fp16}) {
      const vectors::Mode m = vectors::parse_mode(name, acc).value();
      const Profile p = Profile::finite_extended;
      const FormatSpec in = format_spec(m.in, p);
      const int w = in.total_bits;
      const int k = m.terms;
      vectors::detail::Sampler sampler(m, p, seed);
      std::vector<vectors::VectorRecord> recs(kVectors);
      for (auto& r : recs) r = sampler.next();
      Failures bad;
      vectors::parallel_for(recs.size(), kJobs, [&](std::size_t i) {
        std::mt19937_64 rng(seed * 1'000'003 + i);
        const auto base = vectors::run_datapath(recs[i], p);
        std::array<int, 8> perm{};
        std::iota(perm.begin(), perm.begin() + k, 0);
        for (int j = 0; j < kPerms; ++j) {
          std::shuffle(perm.begin(), perm.begin() + k, rng);
          auto r = recs[i];
          r.a = r.b = 0;
          for (int t = 0; t < k; ++t) {
            r.a |= lane_of(recs[i].a, w, perm[t]) << (t * w);
            r.b |= lane_of(recs[i].b, w, perm[t]) << (t * w);
          }
          const auto got = vectors::run_datapath(r, p);
          if (!(got == base)) bad.add(vectors::format_record(recs[i]) + " permuted to a=" + hexs(r.a) + " b=" + hexs(r.b));
        }
      });
      ++seed;
      detail << (detail.tellp() == 0 ? "" : "; ") << vectors::mode_name(m) << "->" << to_string(acc) << " "
             << bad.count() << " bad";
      if (bad.count()) {
        v.pass = false;
        detail << " (first: " << bad.first() << ")";
      }
    }
  }
  v.detail = std::to_string(kVectors) + " vectors x " + std::to_string(kPerms) + " permutations per mode: " + detail.str();
  return v;
}

Verdict shifter_equivalence() {
  using namespace shifter;
  constexpr int kWords = 1000;
  std::uint64_t cases = 0;
  Failures bad;
  std::mt19937_64 rng(5);
  for (int n : {64, 128}) {
    for (ShiftMode mode : {ShiftMode::full, ShiftMode::half, ShiftMode::quarter}) {
      const int lanes = lane_count(mode);
      const int w = n / lanes;
      for (Direction dir : {Direction::right, Direction::left}) {
        // Every subword sees every amount on kWords random words; the other
        // subwords take random amounts.
        for (int lane = 0; lane < lanes; ++lane) {
          for (int s = 0; s < w; ++s) {
            for (int i = 0; i < kWords; ++i) {
              ShiftRequest req;
              req.width = n;
              req.mode = mode;
              req.direction = dir;
              req.data = ref::random_u128(rng, n);
              for (int j = 0; j < lanes; ++j) req.amounts[j] = static_cast<int>(rng() % w);
              req.amounts[lane] = s;
              const ShiftResult got = shift_cfg(req);
              const auto want = ref::plain_subword_shift(n, req.data, lanes, req.amounts, dir == Direction::right);
              ++cases;
              if (got.result != want.result || got.sticky != want.sticky) {
                bad.add("n=" + std::to_string(n) + " lanes=" + std::to_string(lanes) + " amount " + std::to_string(s) +
                        " in subword " + std::to_string(lane));
              }
            }
          }
        }
      }
    }
  }
  Verdict v;
  v.pass = bad.count() == 0;
  v.detail = std::to_string(cases) + " shifts (n=64,128; full/half/quarter; both directions; 1000 words per subword amount), " +
             std::to_string(bad.count()) + " mismatches";
  if (bad.count()) v.detail += "; first: " + bad.first();
  return v;
}

Verdict cost_figures() {
  Verdict v;
  std::ostringstream d;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) {
      v.pass = false;
      d << "MISMATCH " << what << "; ";
    }
  };
  const cost::CostReport r128 = cost::cost_report(128);
  const cost::CostReport r64 = cost::cost_report(64);
  expect(std::abs(r128.overhead_reconfig - 10.7) <= 0.05, "reconfig n=128");
  expect(std::abs(r64.overhead_reconfig - 13.8) <= 0.05, "reconfig n=64");
  expect(std::abs(r128.overhead_multilane - 78.5) <= 0.2, "multi-lane n=128");
  expect(std::abs(r64.overhead_multilane - 75.0) <= 0.05, "multi-lane n=64");
  d << "reconfig " << fixed(r128.overhead_reconfig, 2) << "% (n=128) " << fixed(r64.overhead_reconfig, 2)
    << "% (n=64); multi-lane " << fixed(r128.overhead_multilane, 2) << "% (n=128) " << fixed(r64.overhead_multilane, 2)
    << "% (n=64); GFLOP/s at 1 GHz:";
  const auto rows = cost::throughput_table();
  const double want[] = {2, 2, 4, 4, 2, 8, 8, 16};
  expect(rows.size() == 8, "row count");
  for (std::size_t i = 0; i < rows.size() && i < 8; ++i) {
    d << ' ' << rows[i].gflops(1.0);
    expect(rows[i].gflops(1.0) == want[i], rows[i].label);
  }
  const double fp32 = rows[0].gflops(1.0);
  expect(rows[3].gflops(1.0) == 2 * fp32, "FP16 DPA 2x");
  expect(rows[6].gflops(1.0) == 4 * fp32, "FP8 DPA 4x");
  expect(rows[7].gflops(1.0) == 8 * fp32, "FP4 DPA 8x");
  d << "; DPA ratios " << rows[3].gflops(1.0) / fp32 << "x/" << rows[6].gflops(1.0) / fp32 << "x/"
    << rows[7].gflops(1.0) / fp32 << "x";
  v.detail = d.str();
  return v;
}

Verdict multiplier_equivalence() {
  using namespace multiplier;
  Failures bad;
  std::mt19937_64 rng(6);
  for (int i = 0; i < 1'000'000; ++i) {
    const auto a = static_cast<std::uint32_t>(rng() & 0xFFFFFF);
    const auto b = static_cast<std::uint32_t>(rng() & 0xFFFFFF);
    if (multiply_scalar(a, b) != static_cast<std::uint64_t>(u128{a} * b)) bad.add("scalar " + hexs(a) + "*" + hexs(b));
  }
  const std::uint32_t corners[] = {0, 1, 0xFFFFFF, 0xAAAAAA, 0x555555, 0x800000, 0xFFFFFE};
  for (auto a : corners)
    for (auto b : corners)
      if (multiply_scalar(a, b) != static_cast<std::uint64_t>(u128{a} * b)) bad.add("corner " + hexs(a) + "*" + hexs(b));
  for (int lane = 0; lane < 4; ++lane) {
    for (std::uint32_t x = 0; x < 64; ++x) {
      for (std::uint32_t y = 0; y < 64; ++y) {
        std::array<std::uint32_t, 4> a{}, b{};
        for (int l = 0; l < 4; ++l) {
          a[l] = static_cast<std::uint32_t>(rng() & 63);
          b[l] = static_cast<std::uint32_t>(rng() & 63);
        }
        a[lane] = x;
        b[lane] = y;
        const auto p = multiply(MulMode::simd4x6, a, b);
        for (int l = 0; l < 4; ++l)
          if (p[l] != std::uint64_t{a[l]} * b[l]) bad.add("simd4x6 lane " + std::to_string(l));
      }
    }
  }
  Verdict v;
  v.pass = bad.count() == 0;
  v.detail = "10^6 random + 49 corner scalar pairs, 4 x 4096 SIMD4x6 lane pairs: " + std::to_string(bad.count()) +
             " mismatches";
  if (bad.count()) v.detail += "; first: " + bad.first();
  return v;
}

// Operands with exponents near the extremes so that cancellation, subnormal
// results and overflow all occur, plus zeros, infinities and NaNs.
std::uint32_t fma_operand(std::mt19937_64& rng, const FormatSpec& f) {
  const std::uint32_t bits = static_cast<std::uint32_t>(rng()) & f.word_mask();
  const std::uint32_t sign = bits & (1u << (f.total_bits - 1));
  switch (rng() % 16) {
    case 0: return sign;                                         // zero
    case 1: return sign | (f.exp_field_max() << f.man_bits);     // INF
    case 2: return bits | (f.exp_field_max() << f.man_bits) | 1; // NaN
    default: break;
  }
  if (rng() % 4) return bits;
  const std::uint32_t e = static_cast<std::uint32_t>(rng() % 4);
  return (bits & ~(f.exp_field_max() << f.man_bits)) | (((rng() & 1) ? e : (f.exp_field_max() - 1 - e)) << f.man_bits);
}

// Host fmaf with its IEEE status flags: a third route for FP32 only.
Rounded host_fmaf(std::uint32_t a, std::uint32_t b, std::uint32_t c) {
  float fa, fb, fc;
  std::memcpy(&fa, &a, 4);
  std::memcpy(&fb, &b, 4);
  std::memcpy(&fc, &c, 4);
  std::feclearexcept(FE_ALL_EXCEPT);
  volatile float r = std::fma(fa, fb, fc);
  Rounded out;
  const float rv = r;
  std::memcpy(&out.bits, &rv, 4);
  out.flags.invalid = std::fetestexcept(FE_INVALID) != 0;
  out.flags.overflow = std::fetestexcept(FE_OVERFLOW) != 0;
  out.flags.underflow = std::fetestexcept(FE_UNDERFLOW) != 0;
  out.flags.inexact = std::fetestexcept(FE_INEXACT) != 0;
  return out;
}

Verdict mpfr_cross_validation() {
  constexpr int kCases = 1'000'000;
  const auto t0 = Clock::now();
  std::ostringstream d;
  Verdict v;
  std::mt19937_64 rng(8);
  for (const FormatSpec& f : {kFP32, kFP16}) {
    std::uint64_t bad_oracle = 0, bad_datapath = 0, bad_host = 0, flag_counts[4] = {};
    std::string first;
    for (int i = 0; i < kCases; ++i) {
      const std::uint32_t a = fma_operand(rng, f), b = fma_operand(rng, f), c = fma_operand(rng, f);
      const Rounded ref = ref::mpfr_fma_ref(f, a, b, c);
      const Rounded orc = oracle::oracle_fma(f, f, a, b, c);
      const Rounded dp = transdot::fma(f, f, a, b, c);
      flag_counts[0] += ref.flags.invalid;
      flag_counts[1] += ref.flags.overflow;
      flag_counts[2] += ref.flags.underflow;
      flag_counts[3] += ref.flags.inexact;
      if (!(orc == ref)) {
        if (!bad_oracle++ && first.empty())
          first = std::string(to_string(f.name)) + " a=" + hexs(a) + " b=" + hexs(b) + " c=" + hexs(c) + " oracle " +
                  hexs(orc.bits) + " " + to_string(orc.flags) + " mpfr " + hexs(ref.bits) + " " + to_string(ref.flags);
      }
      if (!(dp == ref)) ++bad_datapath;
      if (f.name == Format::fp32) {
        const Rounded host = host_fmaf(a, b, c);
        const FPValue va = decode(f, a), vb = decode(f, b), vc = decode(f, c);
        const bool nan_in = va.cls == FpClass::nan || vb.cls == FpClass::nan || vc.cls == FpClass::nan;
        const bool both_nan = decode(f, host.bits).cls == FpClass::nan && decode(f, orc.bits).cls == FpClass::nan;
        const bool same_value = both_nan || host.bits == orc.bits;
        const bool same_flags = host.flags.overflow == orc.flags.overflow && host.flags.underflow == orc.flags.underflow &&
                                host.flags.inexact == orc.flags.inexact &&
                                (nan_in || host.flags.invalid == orc.flags.invalid);
        if (!same_value || !same_flags) {
          if (!bad_host++ && first.empty())
            first = "fp32 a=" + hexs(a) + " b=" + hexs(b) + " c=" + hexs(c) + " oracle " + hexs(orc.bits) + " " +
                    to_string(orc.flags) + " host " + hexs(host.bits) + " " + to_string(host.flags);
        }
      }
    }
    if (bad_oracle || bad_datapath || bad_host) v.pass = false;
    d << to_string(f.name) << ": oracle/mpfr " << bad_oracle << " bad, datapath/mpfr " << bad_datapath << " bad";
    if (f.name == Format::fp32) d << ", oracle/host fmaf " << bad_host << " bad";
    d << " (i/o/u/x raised " << flag_counts[0] << "/" << flag_counts[1] << "/" << flag_counts[2] << "/" << flag_counts[3]
      << "); ";
    if (!first.empty()) d << "first: " << first << "; ";
  }
  d << kCases << " vectors per format, underflow = tiny after rounding and inexact, " << fixed(seconds_since(t0), 1)
    << " s";
  v.detail = d.str();
  return v;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Verdict (*run)();
  };
  const Criterion criteria[] = {
      {"exhaustive FP8 scalar FMA vs oracle", exhaustive_fp8_fma},
      {"exhaustive FP4 DP2 exact and 9-bit", exhaustive_fp4_dp2},
      {"DPA oracle equivalence", dpa_oracle_equivalence},
      {"DPA term-permutation invariance", permutation_invariance},
      {"shifter equivalence", shifter_equivalence},
      {"cost model figures", cost_figures},
      {"multiplier mode equivalence", multiplier_equivalence},
      {"FMA cross-validation against MPFR", mpfr_cross_validation},
  };
  std::cout << "transdot acceptance, " << kJobs << " worker(s)\n" << std::flush;
  int failed = 0;
  int index = 0;
  for (const auto& c : criteria) {
    ++index;
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    if (!v.pass) ++failed;
    std::cout << (v.pass ? "PASS" : "FAIL") << " [" << index << "] " << c.name << ": " << v.detail << '\n' << std::flush;
  }
  std::cout << (failed ? std::to_string(failed) + " criterion(s) failed" : std::string("all criteria passed")) << '\n';
  return failed ? 1 : 0;
}
