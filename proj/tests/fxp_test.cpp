/*
 * Copyright 2026 The CNNA Simulator Authors. All Rights Reserved
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "cnna/fxp.hpp"

namespace cnna {
namespace {

const FixedPointFormat q2_6(2, 6);
const FixedPointFormat q2_14(2, 14);

TEST(FixedPointFormat, Parse) {
  EXPECT_EQ(FixedPointFormat::parse("Q2.14"), q2_14);
  EXPECT_EQ(FixedPointFormat::parse("2.6"), q2_6);
  EXPECT_EQ(FixedPointFormat::parse("q8.24").word_bits(), 32);
  EXPECT_THROW(FixedPointFormat::parse("Q2"), InputError);
  EXPECT_THROW(FixedPointFormat::parse("Q2.x"), InputError);
  EXPECT_THROW(FixedPointFormat::parse("Q0.8"), InputError);
  EXPECT_THROW(FixedPointFormat::parse("Q16.17"), InputError);
}

TEST(FixedPointFormat, Range) {
  EXPECT_EQ(q2_6.raw_max(), 127);
  EXPECT_EQ(q2_6.raw_min(), -128);
  EXPECT_DOUBLE_EQ(q2_6.q_max(), 127.0 / 64.0);
  EXPECT_DOUBLE_EQ(q2_6.q_min(), -2.0);
  EXPECT_DOUBLE_EQ(q2_14.resolution(), 1.0 / 16384.0);
}

TEST(Quantize, SubLsbUpdateIsLost) {
  // 1.671875 = 107/64 sits on the Q2.6 grid; a 0.0015624 step is a tenth of an LSB.
  EXPECT_EQ(quantize_value(1.671875 - 0.0015624, q2_6), 1.671875);
  EXPECT_EQ(quantize_raw(1.671875 - 0.0015624, q2_6), 107);
}

TEST(Quantize, Saturates) {
  EXPECT_EQ(quantize_raw(5.0, q2_6), 127);
  EXPECT_EQ(quantize_raw(-5.0, q2_6), -128);
  EXPECT_EQ(quantize_raw(1e300, q2_14), q2_14.raw_max());
  EXPECT_EQ(quantize_raw(-1e300, q2_14), q2_14.raw_min());
  EXPECT_THROW(quantize_raw(std::numeric_limits<double>::quiet_NaN(), q2_6), InputError);
  EXPECT_THROW(quantize_raw(std::numeric_limits<double>::infinity(), q2_6), InputError);
}

TEST(Quantize, TiesGoAwayFromZero) {
  EXPECT_EQ(quantize_raw(0.5 / 64.0, q2_6), 1);
  EXPECT_EQ(quantize_raw(-0.5 / 64.0, q2_6), -1);
  EXPECT_EQ(quantize_raw(1.5 / 64.0, q2_6), 2);
  EXPECT_EQ(quantize_raw(0.5 / 64.0, q2_6, Rounding::half_to_even), 0);
  EXPECT_EQ(quantize_raw(1.5 / 64.0, q2_6, Rounding::half_to_even), 2);
  EXPECT_EQ(quantize_raw(-2.5 / 64.0, q2_6, Rounding::half_to_even), -2);
}

// All 256 Q2.6 words, then a 1/1024 grid over [-3, 3].
TEST(Quantize, Exhaustive8Bit) {
  for (std::int64_t r = q2_6.raw_min(); r <= q2_6.raw_max(); ++r) {
    const double v = to_real(static_cast<Raw>(r), q2_6);
    ASSERT_EQ(quantize_raw(v, q2_6), r);
    ASSERT_EQ(quantize_value(quantize_value(v + 0.3 / 64.0, q2_6), q2_6), quantize_value(v + 0.3 / 64.0, q2_6));
  }
  Raw prev = quantize_raw(-3.0, q2_6);
  for (int i = -3 * 1024; i <= 3 * 1024; ++i) {
    const double x = i / 1024.0;
    const Raw q = quantize_raw(x, q2_6);
    ASSERT_LE(prev, q) << x;
    ASSERT_LE(std::abs(to_real(q, q2_6) - std::clamp(x, q2_6.q_min(), q2_6.q_max())), 0.5 / 64.0 + 1e-15);
    prev = q;
  }
}

TEST(RoundDiv, MatchesHalfAwayFromZero) {
  for (int n = -200; n <= 200; ++n) {
    for (int d : {1, 2, 3, 4, 7, 8}) {
      const auto expect = static_cast<Wide>(std::round(static_cast<double>(n) / d));
      ASSERT_EQ(round_div(n, d), expect) << n << "/" << d;
    }
  }
}

TEST(Requantize, ProductOfTwoWords) {
  // 1.5 * -0.75 = -1.125 exactly
  const auto acc = multiply_exact(quantize(1.5, q2_6), quantize(-0.75, q2_6));
  EXPECT_EQ(acc.frac_bits(), 12);
  EXPECT_DOUBLE_EQ(acc.requantize(q2_6).value(), -1.125);
  // 1.9 * 1.9 saturates
  EXPECT_EQ(multiply_exact(quantize(1.9, q2_6), quantize(1.9, q2_6)).requantize(q2_6).raw, 127);
}

TEST(Requantize, WidensWithoutLoss) {
  EXPECT_EQ(requantize(3, 6, q2_14), 3 << 8);
  EXPECT_EQ(requantize(Wide{1} << 120, 0, q2_14), q2_14.raw_max());
  EXPECT_EQ(requantize(-(Wide{1} << 120), 0, q2_14), q2_14.raw_min());
}

TEST(AddSaturating, ClampsAndChecksFormat) {
  EXPECT_EQ(add_saturating(quantize(1.5, q2_6), quantize(1.5, q2_6)).raw, 127);
  EXPECT_EQ(add_saturating(quantize(-1.5, q2_6), quantize(-1.5, q2_6)).raw, -128);
  EXPECT_THROW(add_saturating(quantize(0.5, q2_6), quantize(0.5, q2_14)), InputError);
}

TEST(WideAccum, HoldsLargestDotProduct) {
  // 4608 products of the most negative word with itself is the worst case.
  for (const auto& fmt : {q2_6, q2_14, FixedPointFormat(2, 30)}) {
    const int bits = accumulator_bits(fmt, 4608);
    EXPECT_LT(bits, 127);
    WideAccum acc(2 * fmt.frac_bits());
    const auto m = static_cast<Raw>(fmt.raw_min());
    for (int i = 0; i < 4608; ++i) acc.add_product(m, m);
    const Wide expect = Wide{4608} * Wide{m} * Wide{m};
    EXPECT_EQ(acc.raw(), expect);
    EXPECT_LT(expect, Wide{1} << (bits - 1));
    EXPECT_EQ(acc.requantize(fmt).raw, fmt.raw_max());
  }
}

TEST(WideAccum, BiasIsAligned) {
  WideAccum acc(12);
  acc.add_aligned(64, 6);  // 1.0
  acc.add_product(32, 64); // 0.5 * 1.0
  EXPECT_DOUBLE_EQ(acc.value(), 1.5);
  EXPECT_EQ(acc.requantize(q2_6).raw, 96);
}

}  // namespace
}  // namespace cnna
