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

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cnna/error.hpp"
#include "cnna/fxp.hpp"

namespace cnna {

// Volume dimensions. Raster order is Z first, then Y (along a line of
// `rows` pixels), then X (one line after another). A vector of length n is
// the shape {1, 1, n}.
struct Shape {
  std::size_t rows = 1;
  std::size_t cols = 1;
  std::size_t depth = 1;

  constexpr std::size_t size() const noexcept { return rows * cols * depth; }

  // x in [0, cols), y in [0, rows), z in [0, depth).
  constexpr std::size_t index(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return ((x * rows) + y) * depth + z;
  }

  static constexpr Shape vector(std::size_t n) noexcept { return {1, 1, n}; }

  std::string str() const {
    return std::to_string(rows) + "x" + std::to_string(cols) + "x" + std::to_string(depth);
  }

  friend constexpr bool operator==(const Shape&, const Shape&) = default;
};

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{}) : shape_(shape), data_(shape.size(), fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size()) {
      throw InputError("tensor payload has " + std::to_string(data_.size()) + " elements, shape " +
                       shape_.str() + " needs " + std::to_string(shape_.size()));
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }

  T& at(std::size_t x, std::size_t y, std::size_t z) { return data_[shape_.index(x, y, z)]; }
  const T& at(std::size_t x, std::size_t y, std::size_t z) const { return data_[shape_.index(x, y, z)]; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }
  std::vector<T>&& release() && noexcept { return std::move(data_); }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

// Raw fixed-point words sharing one format.
struct QTensor {
  Tensor<Raw> words;
  FixedPointFormat format;

  const Shape& shape() const noexcept { return words.shape(); }

  double value(std::size_t i) const noexcept { return to_real(words[i], format); }

  std::vector<double> dequantize() const {
    std::vector<double> out(words.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = value(i);
    return out;
  }

  friend bool operator==(const QTensor&, const QTensor&) = default;
};

template <typename T>
QTensor quantize_tensor(const Tensor<T>& t, const FixedPointFormat& fmt,
                        Rounding mode = Rounding::half_away_from_zero) {
  std::vector<Raw> raw(t.size());
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = quantize_raw(static_cast<double>(t[i]), fmt, mode);
  return {Tensor<Raw>(t.shape(), std::move(raw)), fmt};
}

}  // namespace cnna
