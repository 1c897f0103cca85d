// SPDX-License-Identifier: Apache-2.0
//
// Closed-form structural cost and throughput accounting.
//
// Shifter costs count 2:1 multiplexers. A conventional n-bit barrel shifter
// has log2(n) stages of n muxes. Making it reconfigurable (two halves, four
// quarters) adds mode-dependent amount steering, boundary blocking and
// final-stage bypass muxes: 5n/8 + 3 log2(n) - 5 in total. The alternative of
// separate lanes adds one n/2-bit and two n/4-bit shifters next to the full
// one.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "transdot/datapath.hpp"
#include "transdot/error.hpp"
#include "transdot/formats.hpp"

namespace transdot::cost {

namespace detail {

inline bool is_pow2(long n) { return n > 0 && (n & (n - 1)) == 0; }

inline long log2_exact(long n) {
  long k = 0;
  while ((1L << k) < n) ++k;
  return k;
}

inline void require_width(long n, long min) {
  if (!is_pow2(n) || n < min) {
    throw InvalidWidth("shifter width must be a power of two >= " + std::to_string(min) + ", got " +
                       std::to_string(n));
  }
}

}  // namespace detail

inline long barrel_mux_count(long n) {
  detail::require_width(n, 2);
  return n * detail::log2_exact(n);
}

inline long reconfig_extra_mux(long n) {
  detail::require_width(n, 8);
  return 5 * n / 8 + 3 * detail::log2_exact(n) - 5;
}

inline long multilane_extra_mux(long n) {
  detail::require_width(n, 8);
  const long half = n / 2;
  const long quarter = n / 4;
  return half * detail::log2_exact(half) + 2 * quarter * detail::log2_exact(quarter);
}

struct CostReport {
  long n = 0;
  long base_mux = 0;
  long extra_mux_reconfig = 0;
  long extra_mux_multilane = 0;
  double overhead_reconfig = 0;   // percent of base_mux
  double overhead_multilane = 0;  // percent of base_mux
};

inline CostReport cost_report(long n) {
  CostReport r;
  r.n = n;
  r.base_mux = barrel_mux_count(n);
  r.extra_mux_reconfig = reconfig_extra_mux(n);
  r.extra_mux_multilane = multilane_extra_mux(n);
  r.overhead_reconfig = 100.0 * static_cast<double>(r.extra_mux_reconfig) / static_cast<double>(r.base_mux);
  r.overhead_multilane = 100.0 * static_cast<double>(r.extra_mux_multilane) / static_cast<double>(r.base_mux);
  return r;
}

struct ThroughputRow {
  std::string label;
  OpKind kind;
  Format fmt_in;
  Format fmt_acc;
  int terms;  // products per operation (SIMD lanes or dot-product terms)
  Timing timing;

  /// One multiply and one add per term.
  int flops_per_cycle() const { return 2 * terms * timing.throughput; }
  double gflops(double clock_ghz) const { return flops_per_cycle() * clock_ghz; }
};

/// Per-mode latency/throughput rows in the order of the published
/// performance table.
inline std::vector<ThroughputRow> throughput_table(const DatapathOptions& opts = {}) {
  const auto row = [&](std::string label, OpKind kind, Format in, Format acc) {
    const FormatSpec spec = format_spec(in);
    return ThroughputRow{std::move(label), kind, in, acc, terms_for(kind, spec), timing_for(kind, opts)};
  };
  return {
      row("FP32 FMA Scalar", OpKind::fma_scalar, Format::fp32, Format::fp32),
      row("FP16 FMA Scalar", OpKind::fma_scalar, Format::fp16, Format::fp16),
      row("FP16 FMA SIMD", OpKind::fma_simd, Format::fp16, Format::fp16),
      row("FP16 DPA with FP32 Acc", OpKind::dpa, Format::fp16, Format::fp32),
      row("FP8 FMA Scalar", OpKind::fma_scalar, Format::fp8, Format::fp8),
      row("FP8 FMA SIMD", OpKind::fma_simd, Format::fp8, Format::fp8),
      row("FP8 DPA with FP32 Acc", OpKind::dpa, Format::fp8, Format::fp32),
      row("FP4 DPA with FP32 Acc", OpKind::dpa, Format::fp4, Format::fp32),
  };
}

struct AreaShare {
  std::string_view block;
  double percent;
};

/// Post-layout area shares of the full unit.
inline constexpr std::array<AreaShare, 6> area_breakdown_reference() {
  return {{
      {"multi-mode multiplier", 34.5},
      {"normalization", 15.5},
      {"exponent", 11.8},
      {"alignment shifter and adder", 18.1},
      {"FP4 DP2", 3.9},
      {"others", 16.2},
  }};
}

/// Approximate shares quoted for the baseline multi-format FMA slice.
struct BaselineShares {
  double shifters_low = 15.0;
  double shifters_high = 20.0;
  double multiplier = 30.0;
};

inline constexpr BaselineShares baseline_area_reference() { return {}; }

}  // namespace transdot::cost
