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
#include <filesystem>
#include <set>

#include "cnna/synth.hpp"
#include "cnna/weights.hpp"
#include "support.hpp"

namespace cnna {
namespace {

TEST(Shape, RasterIndexIsABijection) {
  const Shape s{5, 5, 3};
  std::set<std::size_t> seen;
  std::size_t expect = 0;
  for (std::size_t x = 0; x < s.cols; ++x)
    for (std::size_t y = 0; y < s.rows; ++y)
      for (std::size_t z = 0; z < s.depth; ++z) {
        const auto i = s.index(x, y, z);
        EXPECT_EQ(i, expect++);  // z fastest, then y, then x
        seen.insert(i);
      }
  EXPECT_EQ(seen.size(), s.size());
  EXPECT_EQ(*seen.rbegin(), s.size() - 1);
}

TEST(Tensor, RejectsWrongPayload) {
  EXPECT_THROW(Tensor<float>(Shape{2, 2, 2}, std::vector<float>(7)), InputError);
}

TEST(AutoScale, TwoByThreeExample) {
  const std::vector<double> w{0.11, 0.024, -0.30, -0.05, 0.002, 0.1};
  const double s = compute_layer_scale(std::span<const double>(w), 1.0);
  EXPECT_NEAR(s, 0.30, 1e-12);
  const auto ws = scale_weights(std::span<const double>(w), s);
  double peak = 0.0;
  for (double v : ws) peak = std::max(peak, std::abs(v));
  EXPECT_NEAR(peak, 1.0, 1e-12);
  EXPECT_NEAR(ws[2], -1.0, 1e-12);
  EXPECT_NEAR(ws[0], 0.367, 1e-3);
  EXPECT_NEAR(ws[1], 0.08, 1e-12);
  EXPECT_NEAR(ws[3], -0.167, 1e-3);
  EXPECT_NEAR(ws[4], 0.00667, 1e-5);
  EXPECT_NEAR(ws[5], 0.333, 1e-3);
}

TEST(AutoScale, PeakLandsOnTarget) {
  synth::Rng rng(7);
  const FixedPointFormat fmt(2, 14);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> w(synth::pick(rng, 1, 50));
    const double amp = std::pow(10.0, synth::uniform(rng, -4, 2));
    for (auto& v : w) v = synth::uniform(rng, -amp, amp);
    const auto ws = scale_weights(std::span<const double>(w), compute_layer_scale(std::span<const double>(w), fmt));
    double peak = 0.0;
    for (double v : ws) peak = std::max(peak, std::abs(v));
    ASSERT_NEAR(peak, fmt.q_max(), 1e-12);
  }
}

TEST(AutoScale, ZeroLayerAndBadTarget) {
  const std::vector<double> zeros(4, 0.0);
  EXPECT_EQ(compute_layer_scale(std::span<const double>(zeros), 1.0), 1.0);
  EXPECT_THROW(compute_layer_scale(std::span<const double>(zeros), 0.0), InputError);
  EXPECT_THROW(compute_layer_scale(std::span<const double>(), 1.0), InputError);
  EXPECT_THROW(scale_weights(std::span<const double>(zeros), 0.0), InputError);
}

TEST(Realign, IsAPermutationAndInverts) {
  // 2 kernels of 3 words in framework order: kernel index fastest.
  const std::vector<int> fw{0, 10, 1, 11, 2, 12};
  const auto al = realign_kernels(std::span<const int>(fw), 2);
  EXPECT_EQ(al, (std::vector<int>{0, 1, 2, 10, 11, 12}));
  EXPECT_EQ(unalign_kernels(std::span<const int>(al), 2), fw);
  EXPECT_THROW(realign_kernels(std::span<const int>(fw), 4), InputError);
}

TEST(Preprocess, ConvLayerRoundTripsThroughRealignment) {
  synth::Rng rng(11);
  ModelSpec m{"c", {5, 5, 4}, {{LayerKind::conv, 6, 3, 1, 1, Activation::relu}}};
  const FixedPointFormat fmt(2, 14);
  const auto fw = synth::random_float_weights(m, rng, 3.0);
  PreprocessOptions opt;
  opt.format = fmt;
  opt.autoscale = true;
  const auto res = preprocess_model(m, fw, opt);
  const auto& l = res.weights.layers[0];
  EXPECT_EQ(l.dims, (Dims4{6, 3, 3, 4}));
  ASSERT_TRUE(l.scale.has_value());
  const double s = res.report.scales[0];
  const auto back = unalign_kernels(std::span<const Raw>(l.kernels), 6);
  for (std::size_t i = 0; i < back.size(); ++i) ASSERT_EQ(back[i], quantize_raw(fw.layers[0].kernel[i] / s, fmt));
  // kernel k, window (wx, wy), channel z lives at k*len + (wx*3+wy)*4 + z
  const std::size_t len = 3 * 3 * 4;
  EXPECT_EQ(l.kernels[2 * len + (1 * 3 + 2) * 4 + 3], quantize_raw(fw.layers[0].kernel[((1 * 3 + 2) * 4 + 3) * 6 + 2] / s, fmt));
  EXPECT_EQ(res.report.saturated_words[0], 0u);
}

TEST(Preprocess, CountsSaturation) {
  ModelSpec m{"d", {1, 1, 2}, {{LayerKind::dense, 1, 1, 1, 0, Activation::linear}}};
  FloatWeights fw;
  fw.layers.push_back({0, LayerKind::dense, {2, 1, 1, 1}, {0.0f}, {5.0f, -0.5f}});
  PreprocessOptions opt;
  opt.format = FixedPointFormat(2, 6);
  const auto res = preprocess_model(m, fw, opt);
  EXPECT_EQ(res.report.saturated_words[0], 1u);
  EXPECT_EQ(res.weights.layers[0].kernels, (std::vector<Raw>{127, -32}));
  fw.layers[0].dims = {3, 1, 1, 1};
  EXPECT_THROW(preprocess_model(m, fw, opt), InputError);
}

WeightsFile sample_weights(const FixedPointFormat& fmt, bool scaled) {
  synth::Rng rng(3);
  ModelSpec m{"s", {4, 4, 2}, {{LayerKind::conv, 3, 2, 1, 0, Activation::relu},
                               {LayerKind::maxpool, 0, 2, 1, 0, Activation::linear},
                               {LayerKind::dense, 2, 1, 1, 0, Activation::linear}}};
  return synth::random_weights(m, fmt, rng, scaled);
}

TEST(WeightsFile, RoundTrips) {
  for (const auto& fmt : {FixedPointFormat(2, 6), FixedPointFormat(2, 14), FixedPointFormat(4, 28)}) {
    for (bool scaled : {false, true}) {
      const auto wf = sample_weights(fmt, scaled);
      EXPECT_EQ(WeightsFile::deserialize(wf.serialize()), wf);
    }
  }
}

TEST(WeightsFile, HandBuiltHeader) {
  const auto bytes = sample_weights(FixedPointFormat(2, 6), false).serialize();
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "CNNA");
  EXPECT_EQ(bytes[4], 1);  // version, little endian
  EXPECT_EQ(bytes[5], 0);
  EXPECT_EQ(bytes[6], 2);  // I
  EXPECT_EQ(bytes[7], 6);  // F
  EXPECT_EQ(bytes[10], 3);  // layer count
  const auto wf = WeightsFile::deserialize(bytes);
  EXPECT_EQ(wf.layers[0].dims, (Dims4{3, 2, 2, 2}));
  EXPECT_EQ(wf.layers[2].dims, (Dims4{2, 12, 1, 1}));  // 3x3x3 conv out, 2x2x3 after pooling
  EXPECT_TRUE(wf.layers[1].kernels.empty());
}

TEST(WeightsFile, RejectsCorruptInput) {
  const auto good = sample_weights(FixedPointFormat(2, 14), true).serialize();
  auto bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(WeightsFile::deserialize(bad_magic), InputError);
  auto bad_version = good;
  bad_version[4] = 2;
  EXPECT_THROW(WeightsFile::deserialize(bad_version), InputError);
  auto truncated = good;
  truncated.resize(good.size() - 3);
  EXPECT_THROW(WeightsFile::deserialize(truncated), InputError);
  auto trailing = good;
  trailing.push_back(0);
  EXPECT_THROW(WeightsFile::deserialize(trailing), InputError);
  EXPECT_THROW(WeightsFile::deserialize({}), InputError);
}

TEST(WeightsFile, ChecksAgainstModel) {
  const auto wf = sample_weights(FixedPointFormat(2, 14), false);
  ModelSpec m{"s", {4, 4, 2}, {{LayerKind::conv, 3, 2, 1, 0, Activation::relu},
                               {LayerKind::maxpool, 0, 2, 1, 0, Activation::linear},
                               {LayerKind::dense, 2, 1, 1, 0, Activation::linear}}};
  EXPECT_NO_THROW(wf.check_against(m));
  m.layers[0].kernels = 4;
  EXPECT_THROW(wf.check_against(m), InputError);
}

TEST(FloatWeights, RoundTripsAndRejects) {
  synth::Rng rng(5);
  ModelSpec m{"s", {3, 3, 1}, {{LayerKind::conv, 2, 3, 1, 1, Activation::relu}}};
  const auto fw = synth::random_float_weights(m, rng);
  const auto bytes = fw.serialize();
  const auto back = FloatWeights::deserialize(bytes);
  ASSERT_EQ(back.layers.size(), 1u);
  EXPECT_EQ(back.layers[0].kernel, fw.layers[0].kernel);
  EXPECT_EQ(back.layers[0].dims, fw.layers[0].dims);
  auto cut = bytes;
  cut.resize(cut.size() - 1);
  EXPECT_THROW(FloatWeights::deserialize(cut), InputError);
}

TEST(RasterF32, RoundTripsThroughFile) {
  const Shape s{2, 2, 3};
  std::vector<float> v(s.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(i) * 0.25f - 1.0f;
  const auto path = (std::filesystem::temp_directory_path() / "cnna_raster_test.bin").string();
  save_f32(path, v);
  EXPECT_EQ(std::filesystem::file_size(path), s.size() * 4);
  EXPECT_EQ(load_f32(path, s).data(), v);
  EXPECT_THROW(load_f32(path, Shape{2, 2, 2}), InputError);
  std::filesystem::remove(path);
  EXPECT_EQ(encode_f32(std::vector<float>{1.0f}), (std::vector<std::uint8_t>{0, 0, 0x80, 0x3f}));
}

TEST(ModelSpec, JsonRoundTrip) {
  const auto m = ModelSpec::load(testing::data_path("toy_model.json"));
  EXPECT_EQ(ModelSpec::from_json(m.to_json()), m);
  EXPECT_EQ(m.output_shape(), Shape::vector(5));
  EXPECT_THROW(ModelSpec::parse("{\"name\": 1}"), InputError);
}

}  // namespace
}  // namespace cnna
