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

// Brute-force references. Direct nested loops over output pixels, no
// streaming. Fixed-point mode accumulates exactly in ascending window index
// order, rounds once, multiplies by the scale word, rounds again and then
// applies the activation. Padding contributes zeros, also to pooling.
//
// Kernel arrays are kernel-major; within a kernel, element (wx, wy, z) sits
// at (wx * window + wy) * depth + z, the same raster convention as tensors.

#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <vector>

#include "cnna/accel/config.hpp"
#include "cnna/fxp.hpp"
#include "cnna/model.hpp"
#include "cnna/tensor.hpp"
#include "cnna/weights.hpp"

namespace cnna::oracle {

struct Window {
  std::size_t size = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;
};

inline std::size_t out_extent(std::size_t rows, const Window& w) {
  if (w.size > rows + 2 * w.pad || w.size == 0 || w.stride == 0) throw InputError("oracle: bad window");
  return (rows + 2 * w.pad - w.size) / w.stride + 1;
}

// Value at padded coordinates, zero outside the image.
template <typename T>
T padded_at(const Tensor<T>& in, std::size_t px, std::size_t py, std::size_t z, std::size_t pad) {
  if (px < pad || py < pad) return T{};
  const std::size_t x = px - pad;
  const std::size_t y = py - pad;
  if (x >= in.shape().cols || y >= in.shape().rows) return T{};
  return in.at(x, y, z);
}

inline PoolKind pool_kind_of(LayerKind k) {
  switch (k) {
    case LayerKind::maxpool: return PoolKind::max;
    case LayerKind::minpool: return PoolKind::min;
    case LayerKind::avgpool: return PoolKind::avg;
    default: throw InputError("not a pooling layer");
  }
}

// ---------------------------------------------------------------------------
// Float mode

inline Tensor<double> conv_float(const Tensor<double>& in, std::span<const double> kernels, std::span<const double> bias,
                                 const Window& w, Activation act) {
  const auto& s = in.shape();
  const std::size_t k_count = bias.size();
  const std::size_t len = w.size * w.size * s.depth;
  if (kernels.size() != k_count * len) throw InputError("oracle: kernel shape mismatch");
  const std::size_t out = out_extent(s.rows, w);
  Tensor<double> y(Shape{out, out, k_count});
  for (std::size_t ox = 0; ox < out; ++ox)
    for (std::size_t oy = 0; oy < out; ++oy)
      for (std::size_t k = 0; k < k_count; ++k) {
        double acc = bias[k];
        for (std::size_t wx = 0; wx < w.size; ++wx)
          for (std::size_t wy = 0; wy < w.size; ++wy)
            for (std::size_t z = 0; z < s.depth; ++z) {
              acc += padded_at(in, ox * w.stride + wx, oy * w.stride + wy, z, w.pad) *
                     kernels[k * len + (wx * w.size + wy) * s.depth + z];
            }
        y.at(ox, oy, k) = act == Activation::relu ? std::max(acc, 0.0) : acc;
      }
  return y;
}

inline Tensor<double> pool_float(const Tensor<double>& in, const Window& w, PoolKind kind) {
  const auto& s = in.shape();
  const std::size_t out = out_extent(s.rows, w);
  Tensor<double> y(Shape{out, out, s.depth});
  for (std::size_t ox = 0; ox < out; ++ox)
    for (std::size_t oy = 0; oy < out; ++oy)
      for (std::size_t z = 0; z < s.depth; ++z) {
        double acc = padded_at(in, ox * w.stride, oy * w.stride, z, w.pad);
        if (kind == PoolKind::avg) acc = 0.0;
        for (std::size_t wx = 0; wx < w.size; ++wx)
          for (std::size_t wy = 0; wy < w.size; ++wy) {
            const double v = padded_at(in, ox * w.stride + wx, oy * w.stride + wy, z, w.pad);
            if (kind == PoolKind::max) acc = std::max(acc, v);
            else if (kind == PoolKind::min) acc = std::min(acc, v);
            else acc += v;
          }
        if (kind == PoolKind::avg) acc /= static_cast<double>(w.size * w.size);
        y.at(ox, oy, z) = acc;
      }
  return y;
}

inline Tensor<double> dense_float(const Tensor<double>& in, std::span<const double> weights, std::span<const double> bias,
                                  Activation act) {
  const std::size_t len = in.size();
  if (weights.size() != bias.size() * len) throw InputError("oracle: dense shape mismatch");
  Tensor<double> y(Shape::vector(bias.size()));
  for (std::size_t u = 0; u < bias.size(); ++u) {
    double acc = bias[u];
    for (std::size_t i = 0; i < len; ++i) acc += in[i] * weights[u * len + i];
    y[u] = act == Activation::relu ? std::max(acc, 0.0) : acc;
  }
  return y;
}

// ---------------------------------------------------------------------------
// Fixed mode

inline Raw finish_fixed(Wide sum, const FixedPointFormat& fmt, const std::optional<FixedWord>& scale, Activation act) {
  Raw q = requantize(sum, 2 * fmt.frac_bits(), fmt);
  if (scale) q = requantize(Wide{q} * Wide{scale->raw}, fmt.frac_bits() + scale->format.frac_bits(), fmt);
  if (act == Activation::relu && q < 0) q = 0;
  return q;
}

inline QTensor conv_fixed(const QTensor& in, std::span<const Raw> kernels, std::span<const Raw> bias, const Window& w,
                          Activation act, const std::optional<FixedWord>& scale = std::nullopt) {
  const auto& s = in.shape();
  const auto& fmt = in.format;
  const std::size_t k_count = bias.size();
  const std::size_t len = w.size * w.size * s.depth;
  if (kernels.size() != k_count * len) throw InputError("oracle: kernel shape mismatch");
  const std::size_t out = out_extent(s.rows, w);
  Tensor<Raw> y(Shape{out, out, k_count});
  for (std::size_t ox = 0; ox < out; ++ox)
    for (std::size_t oy = 0; oy < out; ++oy)
      for (std::size_t k = 0; k < k_count; ++k) {
        Wide acc = Wide{bias[k]} << fmt.frac_bits();
        for (std::size_t wx = 0; wx < w.size; ++wx)
          for (std::size_t wy = 0; wy < w.size; ++wy)
            for (std::size_t z = 0; z < s.depth; ++z) {
              acc += Wide{padded_at(in.words, ox * w.stride + wx, oy * w.stride + wy, z, w.pad)} *
                     Wide{kernels[k * len + (wx * w.size + wy) * s.depth + z]};
            }
        y.at(ox, oy, k) = finish_fixed(acc, fmt, scale, act);
      }
  return {std::move(y), fmt};
}

inline QTensor pool_fixed(const QTensor& in, const Window& w, PoolKind kind) {
  const auto& s = in.shape();
  const std::size_t out = out_extent(s.rows, w);
  Tensor<Raw> y(Shape{out, out, s.depth});
  for (std::size_t ox = 0; ox < out; ++ox)
    for (std::size_t oy = 0; oy < out; ++oy)
      for (std::size_t z = 0; z < s.depth; ++z) {
        Raw best = padded_at(in.words, ox * w.stride, oy * w.stride, z, w.pad);
        Wide sum = 0;
        for (std::size_t wx = 0; wx < w.size; ++wx)
          for (std::size_t wy = 0; wy < w.size; ++wy) {
            const Raw v = padded_at(in.words, ox * w.stride + wx, oy * w.stride + wy, z, w.pad);
            best = kind == PoolKind::max ? std::max(best, v) : std::min(best, v);
            sum += v;
          }
        y.at(ox, oy, z) = kind == PoolKind::avg ? static_cast<Raw>(round_div(sum, Wide(w.size * w.size))) : best;
      }
  return {std::move(y), in.format};
}

inline QTensor dense_fixed(const QTensor& in, std::span<const Raw> weights, std::span<const Raw> bias, Activation act,
                           const std::optional<FixedWord>& scale = std::nullopt) {
  const std::size_t len = in.words.size();
  if (weights.size() != bias.size() * len) throw InputError("oracle: dense shape mismatch");
  Tensor<Raw> y(Shape::vector(bias.size()));
  for (std::size_t u = 0; u < bias.size(); ++u) {
    Wide acc = Wide{bias[u]} << in.format.frac_bits();
    for (std::size_t i = 0; i < len; ++i) acc += Wide{in.words[i]} * Wide{weights[u * len + i]};
    y[u] = finish_fixed(acc, in.format, scale, act);
  }
  return {std::move(y), in.format};
}

// ---------------------------------------------------------------------------
// Whole models

inline QTensor run_model_fixed(const ModelSpec& model, const WeightsFile& weights, QTensor x) {
  weights.check_against(model);
  if (!(x.shape() == model.input)) throw InputError("oracle: input shape mismatch");
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& l = model.layers[i];
    const auto& lw = weights.layers[i];
    const Window w{l.window, l.stride, l.pad};
    if (l.kind == LayerKind::conv) {
      x = conv_fixed(x, lw.kernels, lw.bias, w, l.activation, lw.scale);
    } else if (l.kind == LayerKind::dense) {
      x = dense_fixed(x, lw.kernels, lw.bias, l.activation, lw.scale);
    } else {
      x = pool_fixed(x, w, pool_kind_of(l.kind));
    }
  }
  return x;
}

// Float reference on the dequantized weights (scale folded back in).
inline Tensor<double> run_model_float(const ModelSpec& model, const WeightsFile& weights, Tensor<double> x) {
  weights.check_against(model);
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& l = model.layers[i];
    const auto& lw = weights.layers[i];
    const Window w{l.window, l.stride, l.pad};
    if (has_weights(l.kind)) {
      const double s = lw.scale ? lw.scale->value() : 1.0;
      std::vector<double> k(lw.kernels.size()), b(lw.bias.size());
      for (std::size_t j = 0; j < k.size(); ++j) k[j] = to_real(lw.kernels[j], weights.format) * s;
      for (std::size_t j = 0; j < b.size(); ++j) b[j] = to_real(lw.bias[j], weights.format) * s;
      x = l.kind == LayerKind::conv ? conv_float(x, k, b, w, l.activation) : dense_float(x, k, b, l.activation);
    } else {
      x = pool_float(x, w, pool_kind_of(l.kind));
    }
  }
  return x;
}

}  // namespace cnna::oracle
