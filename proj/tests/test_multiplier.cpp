// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <gtest/gtest.h>

#include "transdot/multiplier.hpp"

namespace {

using namespace transdot;
using namespace transdot::multiplier;
using boost::multiprecision::cpp_int;

std::vector<std::uint32_t> corner_patterns(int bits) {
  const std::uint32_t all = (1u << bits) - 1;
  return {0u, 1u, all, 0x555555u & all, 0xAAAAAAu & all, 1u << (bits - 1), all >> 1, 2u};
}

TEST(Multiplier, ScalarExamples) {
  EXPECT_EQ(multiply_scalar(0x800000, 0x800000), 0x400000000000ull);
  EXPECT_EQ(multiply_scalar(0xFFFFFF, 0xFFFFFF), 0xFFFFFE000001ull);
  EXPECT_EQ(multiply_scalar(0, 0xFFFFFF), 0u);
}

TEST(Multiplier, Simd4x6Example) {
  const std::uint32_t a[] = {3, 7, 1, 0};
  const std::uint32_t b[] = {5, 7, 1, 9};
  const auto p = multiply(MulMode::simd4x6, a, b);
  EXPECT_EQ(p, (Products{15, 49, 1, 0}));
}

TEST(Multiplier, Simd2x12Example) {
  const std::uint32_t a[] = {0x800, 0xFFF};
  const std::uint32_t b[] = {0x800, 0xFFF};
  const auto p = multiply(MulMode::simd2x12, a, b);
  EXPECT_EQ(p[0], 0x400000u);
  EXPECT_EQ(p[1], 0xFFE001u);
  EXPECT_EQ(p[2], 0u);
  EXPECT_EQ(p[3], 0u);
}

TEST(Multiplier, SegmentationErrors) {
  const std::uint32_t two[] = {1, 2};
  const std::uint32_t four[] = {1, 2, 3, 4};
  const std::uint32_t wide[] = {64, 0, 0, 0};
  EXPECT_THROW(multiply(MulMode::simd4x6, two, two), InvalidSegmentation);
  EXPECT_THROW(multiply(MulMode::simd2x12, four, four), InvalidSegmentation);
  EXPECT_THROW(multiply(MulMode::simd4x6, wide, four), InvalidSegmentation);
  EXPECT_THROW(multiply(MulMode::dpa_fp4, four, four), InvalidSegmentation);
}

TEST(Multiplier, Gating) {
  for (int i = 0; i < kSegments; ++i)
    for (int j = 0; j < kSegments; ++j) {
      EXPECT_FALSE(gated(MulMode::scalar24, i, j));
      EXPECT_EQ(gated(MulMode::simd2x12, i, j), i / 2 != j / 2);
      EXPECT_EQ(gated(MulMode::simd4x6, i, j), i != j);
    }
}

TEST(Multiplier, ScalarMatchesWideMultiply) {
  std::mt19937 rng(1);
  for (int i = 0; i < 1'000'000; ++i) {
    const std::uint32_t a = rng() & 0xFFFFFF;
    const std::uint32_t b = rng() & 0xFFFFFF;
    ASSERT_EQ(multiply_scalar(a, b), static_cast<std::uint64_t>(u128{a} * b));
  }
  for (auto a : corner_patterns(24))
    for (auto b : corner_patterns(24)) ASSERT_EQ(multiply_scalar(a, b), std::uint64_t{a} * b);
}

TEST(Multiplier, Simd2x12MatchesPerLaneMultiply) {
  std::mt19937 rng(2);
  auto draw = [&] { return static_cast<std::uint32_t>(rng() & 0xFFF); };
  for (int i = 0; i < 1'000'000; ++i) {
    const std::uint32_t a[] = {draw(), draw()};
    const std::uint32_t b[] = {draw(), draw()};
    const auto p = multiply(MulMode::simd2x12, a, b);
    ASSERT_EQ(p[0], std::uint64_t{a[0]} * b[0]);
    ASSERT_EQ(p[1], std::uint64_t{a[1]} * b[1]);
  }
}

TEST(Multiplier, Simd4x6ExhaustivePerLanePair) {
  // Every 6x6 operand pair in every lane, with the other lanes holding a
  // rotating pattern so cross-lane leakage would show.
  for (int lane = 0; lane < 4; ++lane) {
    for (std::uint32_t x = 0; x < 64; ++x) {
      for (std::uint32_t y = 0; y < 64; ++y) {
        std::array<std::uint32_t, 4> a{}, b{};
        for (int l = 0; l < 4; ++l) {
          a[l] = (x * 7 + 13 * l) & 63;
          b[l] = (y * 5 + 29 * l) & 63;
        }
        a[lane] = x;
        b[lane] = y;
        const auto p = multiply(MulMode::simd4x6, a, b);
        for (int l = 0; l < 4; ++l) ASSERT_EQ(p[l], std::uint64_t{a[l]} * b[l]);
      }
    }
  }
}

TEST(Multiplier, StructuralEqualsFunctionalAllModes) {
  std::mt19937 rng(3);
  for (int i = 0; i < 100'000; ++i) {
    for (MulMode m : {MulMode::scalar24, MulMode::simd2x12, MulMode::simd4x6}) {
      const int k = lane_count(m);
      const int bits = lane_bits(m);
      std::vector<std::uint32_t> a(k), b(k);
      for (int l = 0; l < k; ++l) {
        a[l] = rng() & ((1u << bits) - 1);
        b[l] = rng() & ((1u << bits) - 1);
      }
      const auto p = multiply(m, a, b);
      for (int l = 0; l < k; ++l) ASSERT_EQ(p[l], std::uint64_t{a[l]} * b[l]);
      for (int l = k; l < 4; ++l) ASSERT_EQ(p[l], 0u);
    }
  }
}

// Exact value of a reduction in units of 2^-(window+1) of an unshifted LSB,
// ignoring sticky: sum of sign * magnitude * 2^(window+1-shift).
cpp_int exact_reduce(const std::vector<DpaTerm>& terms, int window) {
  cpp_int total = 0;
  for (const auto& t : terms) {
    cpp_int v = cpp_int(t.magnitude) << (window + 1);
    v >>= t.rel_shift;
    total += t.sign ? -v : v;
  }
  return total;
}

TEST(Multiplier, DpaCancellation) {
  const std::vector<DpaTerm> terms = {{0x1234, false, 3}, {0x1234, true, 3}};
  const auto s = dpa_reduce(MulMode::dpa2, terms, 8);
  EXPECT_TRUE(s.value == 0);
  EXPECT_FALSE(s.lossy);
}

TEST(Multiplier, DpaEqualTerms) {
  const std::uint64_t one = std::uint64_t{0x8} * 0x8;  // 1.0 * 1.0 E4M3 significands
  const std::vector<DpaTerm> terms(4, DpaTerm{one, false, 0});
  const auto s = dpa_reduce(MulMode::dpa4, terms, 0);
  EXPECT_TRUE(s.value == static_cast<i128>(4 * one) << 1);
}

TEST(Multiplier, DpaSingleTermIdentity) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 10'000; ++i) {
    const std::uint64_t m = rng() & 0xFFFFFF;
    const int window = static_cast<int>(rng() % 64);
    std::vector<DpaTerm> terms = {{m, false, 0}, {0, false, 0}};
    const auto s = dpa_reduce(MulMode::dpa2, terms, window);
    ASSERT_TRUE(s.value == static_cast<i128>(u128{m} << (window + 1)));
    ASSERT_FALSE(s.lossy);
  }
}

TEST(Multiplier, DpaMatchesBigIntegerWithinWindow) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1'000'000; ++i) {
    std::vector<DpaTerm> terms(4);
    for (auto& t : terms) {
      t.magnitude = (rng() & 0xF) * (rng() & 0xF);
      t.sign = rng() & 1;
      t.rel_shift = static_cast<int>(rng() % 17);
    }
    terms[rng() % 4].rel_shift = 0;
    const auto s = dpa_reduce(MulMode::dpa4, terms, 16);
    ASSERT_FALSE(s.lossy);
    ASSERT_TRUE(cpp_int(static_cast<long long>(s.value)) == exact_reduce(terms, 16));
  }
}

TEST(Multiplier, DpaStickyFoldsLostBits) {
  // A shift beyond the window drops bits into the sticky position.
  const std::vector<DpaTerm> terms = {{0b1011, false, 0}, {0b11, false, 2}};
  const auto s = dpa_reduce(MulMode::dpa2, terms, 1);
  // 1011 << 1 = 10110 -> 101100; 11 << 1 = 110 >> 2 = 1, lost 10 -> 11 with sticky.
  EXPECT_TRUE(s.value == (0b101100 + 0b11));
  EXPECT_TRUE(s.lossy);
}

TEST(Multiplier, DpaPermutationInvariant) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 100'000; ++i) {
    std::vector<DpaTerm> terms(4);
    for (auto& t : terms) {
      t.magnitude = rng() & 0xFFF;
      t.sign = rng() & 1;
      t.rel_shift = static_cast<int>(rng() % 40);
    }
    const auto base = dpa_reduce(MulMode::dpa4, terms, 40);
    std::shuffle(terms.begin(), terms.end(), rng);
    const auto perm = dpa_reduce(MulMode::dpa4, terms, 40);
    ASSERT_TRUE(base.value == perm.value);
  }
}

TEST(Multiplier, DpaErrors) {
  const std::vector<DpaTerm> two(2);
  const std::vector<DpaTerm> four(4);
  EXPECT_THROW(dpa_reduce(MulMode::simd2x12, two, 0), InvalidSegmentation);
  EXPECT_THROW(dpa_reduce(MulMode::dpa4, two, 0), InvalidSegmentation);
  EXPECT_THROW(dpa_reduce(MulMode::dpa2, std::vector<DpaTerm>{{1, false, -1}, {}}, 0), InvalidShiftAmount);
  EXPECT_THROW(dpa_reduce(MulMode::dpa4, std::vector<DpaTerm>{{~0ull, false, 0}, {}, {}, {}}, 60), WindowOverflow);
  EXPECT_NO_THROW(dpa_reduce(MulMode::dpa_fp4, four, 0));
}

}  // namespace
