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

#include <cmath>

#include "cnna/oracle.hpp"
#include "cnna/scheduler.hpp"
#include "cnna/synth.hpp"
#include "support.hpp"

namespace cnna {
namespace {

// 3x3x1 image, one 2x2 kernel, no padding; worked out by hand.
TEST(Oracle, HandComputedConv) {
  const FixedPointFormat fmt(4, 12);
  Tensor<double> img(Shape{3, 3, 1});
  // x-major: img.at(x, y, 0) = 3x + y + 1
  for (std::size_t x = 0; x < 3; ++x)
    for (std::size_t y = 0; y < 3; ++y) img.at(x, y, 0) = static_cast<double>(3 * x + y + 1) / 8.0;
  const std::vector<double> k{1.0, 0.0, 0.0, -1.0};  // (wx, wy) = (0,0) minus (1,1)
  const std::vector<double> b{0.5};
  const auto yf = oracle::conv_float(img, k, b, {2, 1, 0}, Activation::linear);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(yf[i], 0.5 - 4.0 / 8.0);

  const auto q = quantize_tensor(img, fmt);
  std::vector<Raw> kq, bq{quantize_raw(0.5, fmt)};
  for (double v : k) kq.push_back(quantize_raw(v, fmt));
  const auto yq = oracle::conv_fixed(q, kq, bq, {2, 1, 0}, Activation::linear);
  EXPECT_EQ(yq.shape(), (Shape{2, 2, 1}));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(yq.words[i], 0);
  const auto relu = oracle::conv_fixed(q, kq, std::vector<Raw>{quantize_raw(-0.25, fmt)}, {2, 1, 0}, Activation::relu);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(relu.words[i], 0);
}

TEST(Oracle, ScaleIsAppliedAfterRounding) {
  const FixedPointFormat fmt(2, 6);
  QTensor x{Tensor<Raw>(Shape::vector(1), std::vector<Raw>{64}), fmt};  // 1.0
  const std::vector<Raw> w{1}, b{0};                                    // 1/64
  const auto y = oracle::dense_fixed(x, w, b, Activation::linear, FixedWord{quantize_raw(0.5, fmt), fmt});
  // round(1/64) stays 1 LSB, times 0.5 is a tie, away from zero -> 1 LSB
  EXPECT_EQ(y.words[0], 1);
}

TEST(Oracle, FixedTracksFloatOnSmallModels) {
  synth::Rng rng(31);
  for (int t = 0; t < 30; ++t) {
    const auto m = synth::random_model(rng);
    const FixedPointFormat fmt(4, 20);
    const auto w = synth::random_weights(m, fmt, rng, false, 0.3);
    const auto x = synth::random_input(m.input, fmt, rng, 0.5);
    const auto yq = oracle::run_model_fixed(m, w, x);
    std::vector<double> xin = x.dequantize();
    const auto yf = oracle::run_model_float(m, w, Tensor<double>(m.input, xin));
    for (std::size_t i = 0; i < yq.words.size(); ++i) ASSERT_NEAR(yq.value(i), yf[i], 1e-3);
  }
}

TEST(Oracle, BadWindow) {
  EXPECT_THROW(oracle::out_extent(2, {3, 1, 0}), InputError);
  EXPECT_EQ(oracle::out_extent(4, {3, 1, 1}), 4u);
  EXPECT_EQ(oracle::out_extent(14, {3, 2, 0}), 6u);
}

// The accelerator agrees with the oracle on random single layers and on
// random multi-layer models.
TEST(Equivalence, RandomLayers) {
  synth::Rng rng(1234);
  for (int t = 0; t < 300; ++t) {
    const auto c = testing::random_layer_case(rng);
    ASSERT_EQ(testing::mismatches(c), 0u) << c.model.to_json().dump();
  }
}

TEST(Equivalence, RandomModels) {
  synth::Rng rng(4321);
  for (int t = 0; t < 100; ++t) {
    const auto m = synth::random_model(rng);
    const FixedPointFormat fmt = t % 2 ? FixedPointFormat(2, 14) : FixedPointFormat(2, 6);
    testing::LayerCase c{m, synth::random_weights(m, fmt, rng, t % 3 == 0), synth::random_input(m.input, fmt, rng),
                         synth::random_config(rng, fmt)};
    try {
      ASSERT_EQ(testing::mismatches(c, sim::Interleaving::random(t)), 0u) << m.to_json().dump();
    } catch (const InputError&) {
      // kernel too large for the drawn weight buffer; grow it
      c.cfg = testing::unsplit(c.cfg, m);
      ASSERT_EQ(testing::mismatches(c), 0u) << m.to_json().dump();
    }
  }
}

}  // namespace
}  // namespace cnna
