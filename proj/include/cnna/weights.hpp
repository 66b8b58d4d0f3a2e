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

// Weight containers, per-layer auto-scaling, realignment and the two binary
// weight formats.
//
// Float weights ("CNNF", input to preprocessing), little-endian:
//   magic "CNNF", u16 version = 1, u32 layer_count, then per layer
//   u32 index, u8 kind, u32 dims[4], u64 bias_count, u64 kernel_count,
//   f32 bias[bias_count], f32 kernel[kernel_count].
//   Kernel values are in framework order: conv dims are
//   [window, window, depth, kernels] and element (x, y, z, k) sits at
//   ((x * window + y) * depth + z) * kernels + k; dense dims are
//   [in_len, units, 1, 1] with element (i, u) at i * units + u.
//
// Quantized weights ("CNNA"), little-endian:
//   magic "CNNA", u16 version = 1, u8 I, u8 F, u8 scale_I, u8 scale_F,
//   u32 layer_count, then per layer u32 index, u8 kind, i32 scale_raw,
//   u32 dims[4], u64 word_count, and word_count two's-complement words of
//   ceil((I + F) / 8) bytes each. The words are the biases (one per kernel)
//   followed by the kernels, kernel-major, each in window traversal order.
//   Conv dims are [kernels, window, window, depth], dense [units, in_len, 1, 1].
//   scale_I = scale_F = 0 marks a file without per-layer scaling.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cnna/error.hpp"
#include "cnna/fxp.hpp"
#include "cnna/model.hpp"
#include "cnna/tensor.hpp"

namespace cnna {

namespace detail {

class ByteWriter {
 public:
  template <typename T>
  void put(T v) {
    using U = std::make_unsigned_t<T>;
    U u;
    std::memcpy(&u, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes_.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
  }
  void put_f32(float f) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    put(u);
  }
  void put_bytes(const char* s, std::size_t n) { bytes_.insert(bytes_.end(), s, s + n); }
  // Low `nbytes` bytes of a two's-complement word.
  void put_word(Raw raw, std::size_t nbytes) {
    const auto u = static_cast<std::uint32_t>(raw);
    for (std::size_t i = 0; i < nbytes; ++i) bytes_.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
  }

  const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }

  void write_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(bytes_.data()), static_cast<std::streamsize>(bytes_.size()));
  }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<std::make_unsigned_t<T>>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, &u, sizeof(T));
    return v;
  }
  float get_f32() {
    const auto u = get<std::uint32_t>();
    float f;
    std::memcpy(&f, &u, 4);
    return f;
  }
  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_), bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  // Sign-extends an nbytes little-endian word.
  std::int64_t get_word(std::size_t nbytes) {
    need(nbytes);
    std::uint64_t u = 0;
    for (std::size_t i = 0; i < nbytes; ++i) u |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += nbytes;
    const int shift = 64 - static_cast<int>(8 * nbytes);
    return static_cast<std::int64_t>(u << shift) >> shift;
  }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw InputError("truncated payload");
  }

  std::vector<std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline std::size_t word_bytes(const FixedPointFormat& fmt) { return (static_cast<std::size_t>(fmt.word_bits()) + 7) / 8; }

}  // namespace detail

using Dims4 = std::array<std::uint32_t, 4>;

// ---------------------------------------------------------------------------
// Auto-scaling

// max_i |W_i| / target_max; an all-zero layer gets 1.
template <typename T>
double compute_layer_scale(std::span<const T> weights, double target_max) {
  if (weights.empty()) throw InputError("cannot scale an empty weight set");
  if (!(target_max > 0.0)) throw InputError("scale target must be positive");
  double peak = 0.0;
  for (T w : weights) peak = std::max(peak, std::abs(static_cast<double>(w)));
  if (peak == 0.0) return 1.0;
  return peak / target_max;
}

template <typename T>
double compute_layer_scale(std::span<const T> weights, const FixedPointFormat& fmt) {
  return compute_layer_scale(weights, fmt.q_max());
}

template <typename T>
std::vector<double> scale_weights(std::span<const T> weights, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw InputError("scale must be positive and finite");
  std::vector<double> out(weights.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(weights[i]) / scale;
  return out;
}

// ---------------------------------------------------------------------------
// Realignment between framework order (kernel index fastest) and the
// kernel-major window traversal order the weight buffer streams.

template <typename T>
std::vector<T> realign_kernels(std::span<const T> framework, std::size_t kernels) {
  if (kernels == 0 || framework.size() % kernels != 0) throw InputError("kernel payload not divisible by kernel count");
  const std::size_t len = framework.size() / kernels;
  std::vector<T> out(framework.size());
  for (std::size_t j = 0; j < len; ++j)
    for (std::size_t k = 0; k < kernels; ++k) out[k * len + j] = framework[j * kernels + k];
  return out;
}

template <typename T>
std::vector<T> unalign_kernels(std::span<const T> aligned, std::size_t kernels) {
  if (kernels == 0 || aligned.size() % kernels != 0) throw InputError("kernel payload not divisible by kernel count");
  const std::size_t len = aligned.size() / kernels;
  std::vector<T> out(aligned.size());
  for (std::size_t k = 0; k < kernels; ++k)
    for (std::size_t j = 0; j < len; ++j) out[j * kernels + k] = aligned[k * len + j];
  return out;
}

// ---------------------------------------------------------------------------
// Float weights

struct FloatLayerWeights {
  std::uint32_t index = 0;
  LayerKind kind = LayerKind::conv;
  Dims4 dims{};
  std::vector<float> bias;
  std::vector<float> kernel;  // framework order

  std::size_t kernel_count() const noexcept { return bias.size(); }
};

struct FloatWeights {
  std::vector<FloatLayerWeights> layers;

  std::vector<std::uint8_t> serialize() const {
    detail::ByteWriter w;
    w.put_bytes("CNNF", 4);
    w.put<std::uint16_t>(1);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(layers.size()));
    for (const auto& l : layers) {
      w.put<std::uint32_t>(l.index);
      w.put<std::uint8_t>(static_cast<std::uint8_t>(l.kind));
      for (auto d : l.dims) w.put<std::uint32_t>(d);
      w.put<std::uint64_t>(l.bias.size());
      w.put<std::uint64_t>(l.kernel.size());
      for (float f : l.bias) w.put_f32(f);
      for (float f : l.kernel) w.put_f32(f);
    }
    return w.bytes();
  }

  static FloatWeights deserialize(std::vector<std::uint8_t> bytes) {
    detail::ByteReader r(std::move(bytes));
    if (r.get_bytes(4) != "CNNF") throw InputError("bad magic");
    if (r.get<std::uint16_t>() != 1) throw InputError("version mismatch");
    FloatWeights fw;
    const auto n = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n; ++i) {
      FloatLayerWeights l;
      l.index = r.get<std::uint32_t>();
      l.kind = kind_from_byte(r.get<std::uint8_t>());
      for (auto& d : l.dims) d = r.get<std::uint32_t>();
      const auto nb = r.get<std::uint64_t>();
      const auto nk = r.get<std::uint64_t>();
      if ((nb + nk) * 4 > r.remaining()) throw InputError("truncated payload");
      l.bias.resize(nb);
      l.kernel.resize(nk);
      for (auto& f : l.bias) f = r.get_f32();
      for (auto& f : l.kernel) f = r.get_f32();
      fw.layers.push_back(std::move(l));
    }
    if (r.remaining() != 0) throw InputError("trailing bytes after float weights");
    return fw;
  }

  void save(const std::string& path) const {
    detail::ByteWriter w;
    const auto b = serialize();
    w.put_bytes(reinterpret_cast<const char*>(b.data()), b.size());
    w.write_file(path);
  }

  static FloatWeights load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    return deserialize(std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()));
  }
};

// ---------------------------------------------------------------------------
// Quantized, realigned weights

struct LayerWeights {
  std::uint32_t index = 0;
  LayerKind kind = LayerKind::conv;
  Dims4 dims{};
  std::vector<Raw> bias;     // one word per kernel
  std::vector<Raw> kernels;  // kernel-major, window traversal order
  std::optional<FixedWord> scale;

  std::size_t kernel_count() const noexcept { return bias.size(); }
  std::size_t kernel_words() const noexcept { return bias.empty() ? 0 : kernels.size() / bias.size(); }
  std::span<const Raw> kernel(std::size_t k) const {
    return std::span<const Raw>(kernels).subspan(k * kernel_words(), kernel_words());
  }

  friend bool operator==(const LayerWeights&, const LayerWeights&) = default;
};

struct WeightsFile {
  FixedPointFormat format;
  std::optional<FixedPointFormat> scale_format;
  std::vector<LayerWeights> layers;

  friend bool operator==(const WeightsFile&, const WeightsFile&) = default;

  std::vector<std::uint8_t> serialize() const {
    detail::ByteWriter w;
    w.put_bytes("CNNA", 4);
    w.put<std::uint16_t>(1);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(format.int_bits()));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(format.frac_bits()));
    w.put<std::uint8_t>(scale_format ? static_cast<std::uint8_t>(scale_format->int_bits()) : 0);
    w.put<std::uint8_t>(scale_format ? static_cast<std::uint8_t>(scale_format->frac_bits()) : 0);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(layers.size()));
    const auto nbytes = detail::word_bytes(format);
    for (const auto& l : layers) {
      w.put<std::uint32_t>(l.index);
      w.put<std::uint8_t>(static_cast<std::uint8_t>(l.kind));
      w.put<std::int32_t>(l.scale ? l.scale->raw : 0);
      for (auto d : l.dims) w.put<std::uint32_t>(d);
      w.put<std::uint64_t>(l.bias.size() + l.kernels.size());
      for (Raw v : l.bias) w.put_word(v, nbytes);
      for (Raw v : l.kernels) w.put_word(v, nbytes);
    }
    return w.bytes();
  }

  static WeightsFile deserialize(std::vector<std::uint8_t> bytes) {
    detail::ByteReader r(std::move(bytes));
    if (r.get_bytes(4) != "CNNA") throw InputError("bad magic");
    if (r.get<std::uint16_t>() != 1) throw InputError("version mismatch");
    WeightsFile wf;
    const int i_bits = r.get<std::uint8_t>();
    const int f_bits = r.get<std::uint8_t>();
    const int si_bits = r.get<std::uint8_t>();
    const int sf_bits = r.get<std::uint8_t>();
    wf.format = FixedPointFormat(i_bits, f_bits);
    if (si_bits != 0 || sf_bits != 0) wf.scale_format = FixedPointFormat(si_bits, sf_bits);
    const auto n = r.get<std::uint32_t>();
    const auto nbytes = detail::word_bytes(wf.format);
    for (std::uint32_t i = 0; i < n; ++i) {
      LayerWeights l;
      l.index = r.get<std::uint32_t>();
      l.kind = kind_from_byte(r.get<std::uint8_t>());
      const auto scale_raw = r.get<std::int32_t>();
      for (auto& d : l.dims) d = r.get<std::uint32_t>();
      const auto count = r.get<std::uint64_t>();
      if (count > r.remaining() / nbytes) throw InputError("truncated payload");
      std::size_t kernels = has_weights(l.kind) ? l.dims[0] : 0;
      std::size_t per_kernel = l.kind == LayerKind::conv    ? std::size_t{l.dims[1]} * l.dims[2] * l.dims[3]
                               : l.kind == LayerKind::dense ? std::size_t{l.dims[1]}
                                                            : 0;
      if (count != kernels * (per_kernel + 1)) {
        throw InputError("layer " + std::to_string(l.index) + ": word count " + std::to_string(count) +
                         " does not match dims");
      }
      auto read_word = [&] {
        const auto v = r.get_word(nbytes);
        if (!wf.format.contains(v)) throw InputError("raw word out of range for " + wf.format.str());
        return static_cast<Raw>(v);
      };
      l.bias.resize(kernels);
      l.kernels.resize(kernels * per_kernel);
      for (auto& v : l.bias) v = read_word();
      for (auto& v : l.kernels) v = read_word();
      if (wf.scale_format && has_weights(l.kind)) {
        if (!wf.scale_format->contains(scale_raw)) throw InputError("scale word out of range");
        l.scale = FixedWord{scale_raw, *wf.scale_format};
      }
      wf.layers.push_back(std::move(l));
    }
    if (r.remaining() != 0) throw InputError("trailing bytes after weights");
    return wf;
  }

  void save(const std::string& path) const {
    detail::ByteWriter w;
    const auto b = serialize();
    w.put_bytes(reinterpret_cast<const char*>(b.data()), b.size());
    w.write_file(path);
  }

  static WeightsFile load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    return deserialize(std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()));
  }

  // Throws unless the layers line up with the model's layer list.
  void check_against(const ModelSpec& model) const {
    const auto shapes = model.shapes();
    if (layers.size() != model.layers.size()) {
      throw InputError("weights have " + std::to_string(layers.size()) + " layers, model has " +
                       std::to_string(model.layers.size()));
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      const auto& spec = model.layers[i];
      const auto& in = shapes[i];
      if (l.index != i || l.kind != spec.kind) throw InputError("weights layer " + std::to_string(i) + " does not match model");
      Dims4 want{};
      if (spec.kind == LayerKind::conv) {
        want = {static_cast<std::uint32_t>(spec.kernels), static_cast<std::uint32_t>(spec.window),
                static_cast<std::uint32_t>(spec.window), static_cast<std::uint32_t>(in.depth)};
      } else if (spec.kind == LayerKind::dense) {
        want = {static_cast<std::uint32_t>(spec.kernels), static_cast<std::uint32_t>(in.size()), 1, 1};
      }
      if (l.dims != want) throw InputError("weights layer " + std::to_string(i) + " has wrong dims");
    }
  }
};

// ---------------------------------------------------------------------------
// Preprocessing

struct PreprocessOptions {
  FixedPointFormat format;
  bool autoscale = false;
  std::optional<FixedPointFormat> scale_format;  // defaults to `format`
  std::optional<double> scale_target;            // defaults to format.q_max()
  Rounding rounding = Rounding::half_away_from_zero;
};

struct PreprocessReport {
  std::vector<std::size_t> saturated_words;  // per layer
  std::vector<double> scales;                // per layer, 1 when not scaled
};

struct PreprocessResult {
  WeightsFile weights;
  PreprocessReport report;
};

inline PreprocessResult preprocess_model(const ModelSpec& model, const FloatWeights& fw, const PreprocessOptions& opt) {
  const auto shapes = model.shapes();
  if (fw.layers.size() != model.layers.size()) throw InputError("float weights layer count does not match model");
  PreprocessResult res;
  res.weights.format = opt.format;
  if (opt.autoscale) res.weights.scale_format = opt.scale_format.value_or(opt.format);
  const double target = opt.scale_target.value_or(opt.format.q_max());

  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& spec = model.layers[i];
    const auto& src = fw.layers[i];
    const auto& in = shapes[i];
    if (src.index != i || src.kind != spec.kind) throw InputError("float weights layer " + std::to_string(i) + " does not match model");

    LayerWeights out;
    out.index = static_cast<std::uint32_t>(i);
    out.kind = spec.kind;
    std::size_t saturated = 0;
    double scale = 1.0;
    if (has_weights(spec.kind)) {
      const auto k = spec.kernels;
      Dims4 want_src{};
      if (spec.kind == LayerKind::conv) {
        want_src = {static_cast<std::uint32_t>(spec.window), static_cast<std::uint32_t>(spec.window),
                    static_cast<std::uint32_t>(in.depth), static_cast<std::uint32_t>(k)};
        out.dims = {want_src[3], want_src[0], want_src[1], want_src[2]};
      } else {
        want_src = {static_cast<std::uint32_t>(in.size()), static_cast<std::uint32_t>(k), 1, 1};
        out.dims = {want_src[1], want_src[0], 1, 1};
      }
      const std::size_t per_kernel = spec.kind == LayerKind::conv ? spec.window * spec.window * in.depth : in.size();
      if (src.dims != want_src || src.bias.size() != k || src.kernel.size() != k * per_kernel) {
        throw InputError("float weights layer " + std::to_string(i) + ": shape mismatch");
      }
      std::vector<double> kernel(src.kernel.begin(), src.kernel.end());
      std::vector<double> bias(src.bias.begin(), src.bias.end());
      if (opt.autoscale) {
        scale = compute_layer_scale(std::span<const double>(kernel), target);
        kernel = scale_weights(std::span<const double>(kernel), scale);
        bias = scale_weights(std::span<const double>(bias), scale);
        out.scale = quantize(scale, *res.weights.scale_format, opt.rounding);
      }
      auto q = [&](double v) {
        const double scaled = std::ldexp(v, opt.format.frac_bits());
        if (std::round(scaled) > static_cast<double>(opt.format.raw_max()) ||
            std::round(scaled) < static_cast<double>(opt.format.raw_min())) {
          ++saturated;
        }
        return quantize_raw(v, opt.format, opt.rounding);
      };
      for (double b : bias) out.bias.push_back(q(b));
      std::vector<Raw> fk(kernel.size());
      for (std::size_t j = 0; j < kernel.size(); ++j) fk[j] = q(kernel[j]);
      out.kernels = realign_kernels(std::span<const Raw>(fk), k);
    } else if (!src.bias.empty() || !src.kernel.empty()) {
      throw InputError("float weights layer " + std::to_string(i) + ": pooling layers carry no weights");
    }
    res.weights.layers.push_back(std::move(out));
    res.report.saturated_words.push_back(saturated);
    res.report.scales.push_back(scale);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Raw float32 raster files (inputs and outputs): little-endian, no header,
// element order as Shape::index.

inline std::vector<std::uint8_t> encode_f32(std::span<const float> values) {
  detail::ByteWriter w;
  for (float f : values) w.put_f32(f);
  return w.bytes();
}

inline Tensor<float> decode_f32(std::vector<std::uint8_t> bytes, const Shape& shape) {
  if (bytes.size() != shape.size() * 4) {
    throw InputError("raster has " + std::to_string(bytes.size()) + " bytes, " + shape.str() + " needs " +
                     std::to_string(shape.size() * 4));
  }
  detail::ByteReader r(std::move(bytes));
  std::vector<float> v(shape.size());
  for (auto& f : v) f = r.get_f32();
  return Tensor<float>(shape, std::move(v));
}

inline void save_f32(const std::string& path, std::span<const float> values) {
  detail::ByteWriter w;
  for (float f : values) w.put_f32(f);
  w.write_file(path);
}

inline Tensor<float> load_f32(const std::string& path, const Shape& shape) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  return decode_f32(std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()), shape);
}

}  // namespace cnna
