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

// Seeded random models, weights and inputs for tests and fixtures.

#pragma once

#include <random>

#include "cnna/accel/config.hpp"
#include "cnna/model.hpp"
#include "cnna/tensor.hpp"
#include "cnna/weights.hpp"

namespace cnna::synth {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
inline std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline QTensor random_input(const Shape& s, const FixedPointFormat& fmt, Rng& rng, double amplitude = 1.0) {
  Tensor<Raw> t(s);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = quantize_raw(uniform(rng, -amplitude, amplitude), fmt);
  return {std::move(t), fmt};
}

inline Tensor<float> random_float_input(const Shape& s, Rng& rng, double amplitude = 1.0) {
  Tensor<float> t(s);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(uniform(rng, -amplitude, amplitude));
  return t;
}

// Float weights in framework order, the layout preprocess expects.
inline FloatWeights random_float_weights(const ModelSpec& model, Rng& rng, double amplitude = 0.5) {
  const auto shapes = model.shapes();
  FloatWeights fw;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& l = model.layers[i];
    FloatLayerWeights out;
    out.index = static_cast<std::uint32_t>(i);
    out.kind = l.kind;
    if (l.kind == LayerKind::conv) {
      out.dims = {static_cast<std::uint32_t>(l.window), static_cast<std::uint32_t>(l.window),
                  static_cast<std::uint32_t>(shapes[i].depth), static_cast<std::uint32_t>(l.kernels)};
    } else if (l.kind == LayerKind::dense) {
      out.dims = {static_cast<std::uint32_t>(shapes[i].size()), static_cast<std::uint32_t>(l.kernels), 1, 1};
    }
    if (has_weights(l.kind)) {
      const std::size_t n = std::size_t{out.dims[0]} * out.dims[1] * out.dims[2] * out.dims[3];
      for (std::size_t k = 0; k < l.kernels; ++k) out.bias.push_back(static_cast<float>(uniform(rng, -amplitude, amplitude)));
      for (std::size_t j = 0; j < n; ++j) out.kernel.push_back(static_cast<float>(uniform(rng, -amplitude, amplitude)));
    }
    fw.layers.push_back(std::move(out));
  }
  return fw;
}

inline WeightsFile random_weights(const ModelSpec& model, const FixedPointFormat& fmt, Rng& rng, bool autoscale,
                                  double amplitude = 0.5) {
  PreprocessOptions opt;
  opt.format = fmt;
  opt.autoscale = autoscale;
  return preprocess_model(model, random_float_weights(model, rng, amplitude), opt).weights;
}

// A small random network: one or two conv/pool layers and optionally a dense
// head. Activation, padding, stride and pooling kind are all drawn.
inline ModelSpec random_model(Rng& rng) {
  ModelSpec m;
  m.name = "random";
  const std::size_t rows = pick(rng, 3, 7);
  m.input = Shape{rows, rows, pick(rng, 1, 4)};
  Shape cur = m.input;
  const std::size_t n = pick(rng, 1, 3);
  for (std::size_t i = 0; i < n; ++i) {
    LayerSpec l;
    const auto r = pick(rng, 0, 9);
    if (i + 1 == n && r >= 8) {
      l.kind = LayerKind::dense;
      l.kernels = pick(rng, 1, 6);
    } else if (r >= 5 && cur.rows >= 2) {
      l.kind = r == 5 ? LayerKind::minpool : (r == 6 ? LayerKind::avgpool : LayerKind::maxpool);
      l.window = pick(rng, 2, std::min<std::size_t>(3, cur.rows));
      l.stride = pick(rng, 1, l.window);
      l.pad = pick(rng, 0, 1) * (l.window > 2 ? 1 : 0);
    } else {
      l.kind = LayerKind::conv;
      l.kernels = pick(rng, 1, 6);
      l.window = pick(rng, 1, std::min<std::size_t>(3, cur.rows));
      l.stride = pick(rng, 1, 2);
      l.pad = l.window > 1 ? pick(rng, 0, 1) : 0;
    }
    if (has_weights(l.kind)) l.activation = pick(rng, 0, 1) ? Activation::relu : Activation::linear;
    cur = layer_output_shape(l, cur);
    m.layers.push_back(l);
  }
  return m;
}

// A random accelerator instance small enough to force splits now and then.
inline CnnaConfig random_config(Rng& rng, const FixedPointFormat& fmt) {
  CnnaConfig c;
  c.pe_count = pick(rng, 1, 4);
  c.pe_bw = pick(rng, 1, 4);
  c.db_out_multiplier = pick(rng, 1, 3);
  c.wb_capacity_packages = pick(rng, 6, 60);
  c.channel_capacity = pick(rng, 1, 8);
  c.format = fmt;
  return c;
}

// One conv, pool or dense layer with rows <= 16, depth <= 32 and
// kernels <= 16, for layer-level equivalence sweeps.
inline ModelSpec random_layer(Rng& rng) {
  ModelSpec m;
  m.name = "layer";
  const std::size_t rows = pick(rng, 1, 16);
  m.input = Shape{rows, rows, pick(rng, 1, 32)};
  LayerSpec l;
  const auto kind = pick(rng, 0, 2);
  if (kind == 0) {
    l.kind = LayerKind::conv;
    l.kernels = pick(rng, 1, 16);
    l.window = pick(rng, 1, std::min<std::size_t>(5, rows + 2));
    l.pad = l.window > 1 ? pick(rng, 0, std::min<std::size_t>(2, l.window - 1)) : 0;
    if (l.window > rows + 2 * l.pad) l.pad = (l.window - rows + 1) / 2;
    l.stride = pick(rng, 1, 3);
  } else if (kind == 1) {
    const LayerKind pools[] = {LayerKind::maxpool, LayerKind::minpool, LayerKind::avgpool};
    l.kind = pools[pick(rng, 0, 2)];
    l.window = pick(rng, 1, std::min<std::size_t>(4, rows + 2));
    l.pad = pick(rng, 0, std::min<std::size_t>(1, l.window - 1));
    if (l.window > rows + 2 * l.pad) l.pad = (l.window - rows + 1) / 2;
    l.stride = pick(rng, 1, l.window);
  } else {
    l.kind = LayerKind::dense;
    l.kernels = pick(rng, 1, 16);
    const std::size_t r = pick(rng, 1, 4);
    m.input = Shape{r, r, pick(rng, 1, 32)};
  }
  if (has_weights(l.kind)) l.activation = pick(rng, 0, 1) ? Activation::relu : Activation::linear;
  m.layers.push_back(l);
  m.shapes();
  return m;
}

}  // namespace cnna::synth
