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

#include <sstream>

#include "cnna/qtrain.hpp"
#include "cnna/synth.hpp"
#include "support.hpp"

namespace cnna::qtrain {
namespace {

const FixedPointFormat q2_6(2, 6);

TEST(NaiveSgd, SingleStepFreezes) {
  const auto w = quantize(1.671875, q2_6);
  // alpha * grad = 0.0015624
  EXPECT_EQ(sgd_step_naive(w, 0.15624, 0.01), w);
}

TEST(NaiveSgd, SubHalfLsbStreamNeverMoves) {
  synth::Rng rng(3);
  const double alpha = 0.01;
  const double limit = q2_6.resolution() / 2.0 / alpha;  // |alpha*g| < LSB/2
  std::vector<Raw> w(64);
  for (auto& v : w) v = static_cast<Raw>(synth::pick(rng, 0, 255)) - 128;
  const auto start = w;
  for (int step = 0; step < 1000; ++step) {
    std::vector<double> g(w.size());
    for (auto& v : g) v = synth::uniform(rng, -limit, limit) * 0.999;
    w = sgd_step_naive(w, g, alpha, q2_6);
  }
  EXPECT_EQ(w, start);
}

TEST(LazySgd, ChangesAfterAnalyticStepCount) {
  // the same sub-LSB step as above, applied to the float master copy
  auto sw = ShadowWeights::make({1.671875}, 0.01, q2_6);
  const double g = 0.15624;
  const std::size_t expect = testing::lazy_steps_to_change(1.671875, 0.01 * g, q2_6);
  EXPECT_EQ(expect, 6u);
  std::size_t n = 0;
  while (sw.WQ[0] == 107) {
    sw = sgd_step_lazy(std::move(sw), std::vector<double>{g});
    ++n;
    ASSERT_LT(n, 1000u);
  }
  EXPECT_EQ(n, expect);
  EXPECT_EQ(sw.WQ[0], 106);
}

TEST(LazySgd, StepCountOverRandomCases) {
  synth::Rng rng(5);
  for (int t = 0; t < 500; ++t) {
    const Raw start = static_cast<Raw>(synth::pick(rng, 0, 200)) - 100;
    const double w0 = to_real(start, q2_6);
    double g = synth::uniform(rng, 0.01, 0.4);
    if (synth::pick(rng, 0, 1)) g = -g;
    auto sw = ShadowWeights::make({w0}, 0.01, q2_6);
    std::size_t n = 0;
    while (sw.WQ[0] == start && n < 10000) {
      sw = sgd_step_lazy(std::move(sw), std::vector<double>{g});
      ++n;
    }
    // floating accumulation can land a hair either side of an exact tie
    const auto expect = testing::lazy_steps_to_change(w0, 0.01 * g, q2_6);
    ASSERT_LE(n > expect ? n - expect : expect - n, 1u) << w0 << " " << g;
    ASSERT_EQ(std::abs(sw.WQ[0] - start), 1);
  }
}

TEST(LazySgd, NaiveStaysFrozenOnTheSameStream) {
  FixedWord naive = quantize(1.671875, q2_6);
  auto lazy = ShadowWeights::make({1.671875}, 0.01, q2_6);
  for (int i = 0; i < 1000; ++i) {
    naive = sgd_step_naive(naive, 0.15624, 0.01);
    lazy = sgd_step_lazy(std::move(lazy), std::vector<double>{0.15624});
  }
  EXPECT_EQ(naive.raw, 107);
  EXPECT_EQ(lazy.WQ[0], quantize_raw(1.671875 - 1000 * 0.0015624, q2_6));
}

TEST(Blobs, SeededAndNormalized) {
  const auto a = make_blobs({});
  const auto b = make_blobs({});
  EXPECT_EQ(a.train.x, b.train.x);
  EXPECT_EQ(a.train.size() + a.val.size(), 600u);
  EXPECT_EQ(a.val.size(), 120u);
  for (const auto& p : a.train.x) {
    EXPECT_GE(p[0], -1.0);
    EXPECT_LE(p[1], 1.0);
  }
  BlobsOptions o;
  o.seed = 2;
  EXPECT_NE(make_blobs(o).train.x, a.train.x);
  o.classes = 1;
  EXPECT_THROW(make_blobs(o), InputError);
}

TEST(Mlp, UntrainedNetworkIsAtChance) {
  const auto d = make_blobs({});
  TrainOptions opt;
  opt.format = q2_6;
  const Mlp net(2, 4, opt);
  EXPECT_NEAR(net.accuracy(d.train), 0.25, 0.05);
}

TEST(Mlp, FixedForwardUsesStoredWords) {
  TrainOptions opt;
  opt.format = FixedPointFormat(2, 14);
  opt.autoscale = true;
  const Mlp net(2, 3, opt);
  const auto acts = net.forward({0.5, -0.25});
  const auto& l0 = net.layers()[0];
  ASSERT_TRUE(l0.scale.has_value());
  QTensor x{Tensor<Raw>(Shape::vector(2), std::vector<Raw>{quantize_raw(0.5, *opt.format), quantize_raw(-0.25, *opt.format)}),
            *opt.format};
  const auto h = oracle::dense_fixed(x, l0.w.WQ, l0.b.WQ, Activation::relu, l0.scale);
  EXPECT_EQ(acts[1], h.dequantize());
}

struct Trend {
  double float_acc, lazy_acc, naive_acc;
  std::size_t naive_changes;
};

Trend trend(std::uint64_t seed) {
  const auto d = make_blobs({});
  TrainOptions f;
  f.seed = seed;
  TrainOptions lazy = f;
  lazy.format = FixedPointFormat(2, 14);
  lazy.rule = UpdateRule::lazy;
  lazy.autoscale = true;
  TrainOptions naive = f;
  naive.format = q2_6;
  naive.rule = UpdateRule::naive;
  const auto rn = train_toy(d, naive);
  return {train_toy(d, f).final_train_acc(), train_toy(d, lazy).final_train_acc(), rn.final_train_acc(),
          rn.word_changes};
}

TEST(Training, FloatLazyAndNaiveSeparate) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto t = trend(seed);
    EXPECT_GE(t.float_acc, 0.95) << seed;
    EXPECT_LE(t.float_acc - t.lazy_acc, 0.05) << seed;
    EXPECT_NEAR(t.naive_acc, 0.25, 0.10) << seed;
    EXPECT_EQ(t.naive_changes, 0u) << seed;
  }
}

TEST(Training, CurveCsv) {
  TrainOptions opt;
  opt.epochs = 3;
  const auto r = train_toy(make_blobs({}), opt);
  ASSERT_EQ(r.curve.size(), 3u);
  std::ostringstream os;
  r.write_csv(os);
  EXPECT_EQ(os.str().rfind("epoch,train_acc,val_acc,loss\n1,", 0), 0u);
  EXPECT_FALSE(r.diverged);
}

TEST(Training, RejectsBadOptions) {
  TrainOptions opt;
  opt.lr = 0.0;
  EXPECT_THROW(train_toy(make_blobs({}), opt), InputError);
}

}  // namespace
}  // namespace cnna::qtrain
