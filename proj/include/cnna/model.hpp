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

// Model description: an input volume followed by conv/pool/dense layers.
// Stored as JSON text:
//
//   {"name": "toy", "input": [8, 8, 4],
//    "layers": [{"type": "conv", "kernels": 8, "window": 3, "stride": 1,
//                "pad": 1, "activation": "relu"},
//               {"type": "maxpool", "window": 2, "stride": 2},
//               {"type": "dense", "units": 5}]}

#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cnna/error.hpp"
#include "cnna/tensor.hpp"

namespace cnna {

enum class LayerKind : std::uint8_t {
  conv = 0,
  maxpool = 1,
  minpool = 2,
  avgpool = 3,
  dense = 4,
};

enum class Activation : std::uint8_t { linear = 0, relu = 1 };

inline bool is_pool(LayerKind k) noexcept {
  return k == LayerKind::maxpool || k == LayerKind::minpool || k == LayerKind::avgpool;
}

inline bool has_weights(LayerKind k) noexcept { return k == LayerKind::conv || k == LayerKind::dense; }

inline const char* kind_name(LayerKind k) noexcept {
  switch (k) {
    case LayerKind::conv: return "conv";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::minpool: return "minpool";
    case LayerKind::avgpool: return "avgpool";
    case LayerKind::dense: return "dense";
  }
  return "?";
}

inline LayerKind parse_kind(const std::string& s) {
  for (auto k : {LayerKind::conv, LayerKind::maxpool, LayerKind::minpool, LayerKind::avgpool, LayerKind::dense}) {
    if (s == kind_name(k)) return k;
  }
  throw InputError("unknown layer type '" + s + "'");
}

inline LayerKind kind_from_byte(std::uint8_t b) {
  if (b > static_cast<std::uint8_t>(LayerKind::dense)) throw InputError("unknown layer kind byte " + std::to_string(b));
  return static_cast<LayerKind>(b);
}

inline const char* activation_name(Activation a) noexcept { return a == Activation::relu ? "relu" : "linear"; }

inline Activation parse_activation(const std::string& s) {
  if (s == "linear") return Activation::linear;
  if (s == "relu") return Activation::relu;
  throw InputError("unknown activation '" + s + "'");
}

struct LayerSpec {
  LayerKind kind = LayerKind::conv;
  std::size_t kernels = 0;  // conv kernels or dense units
  std::size_t window = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;
  Activation activation = Activation::linear;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Output volume of a layer for a given input volume.
inline Shape layer_output_shape(const LayerSpec& layer, const Shape& in) {
  if (layer.kind == LayerKind::dense) {
    if (layer.kernels == 0) throw InputError("dense layer needs units > 0");
    return Shape::vector(layer.kernels);
  }
  if (in.rows != in.cols) throw InputError("conv/pool input must be square, got " + in.str());
  if (layer.window == 0 || layer.stride == 0) throw InputError("window and stride must be >= 1");
  const std::size_t padded = in.rows + 2 * layer.pad;
  if (layer.window > padded) throw InputError("window " + std::to_string(layer.window) + " exceeds padded input " + in.str());
  const std::size_t out = (padded - layer.window) / layer.stride + 1;
  if (layer.kind == LayerKind::conv) {
    if (layer.kernels == 0) throw InputError("conv layer needs kernels > 0");
    return {out, out, layer.kernels};
  }
  return {out, out, in.depth};
}

struct ModelSpec {
  std::string name;
  Shape input;
  std::vector<LayerSpec> layers;

  // shapes()[0] is the input; shapes()[i + 1] is the output of layer i.
  std::vector<Shape> shapes() const {
    if (input.size() == 0) throw InputError("model input has zero size");
    std::vector<Shape> out{input};
    for (const auto& l : layers) out.push_back(layer_output_shape(l, out.back()));
    return out;
  }

  Shape output_shape() const { return shapes().back(); }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;

  static ModelSpec from_json(const nlohmann::json& j) {
    static const std::set<std::string> top_keys{"name", "input", "layers"};
    static const std::set<std::string> layer_keys{"type", "kernels", "units", "window", "stride", "pad", "activation"};
    try {
      for (const auto& [k, _] : j.items()) {
        if (!top_keys.count(k)) throw InputError("unknown model key '" + k + "'");
      }
      ModelSpec m;
      m.name = j.at("name").get<std::string>();
      const auto dims = j.at("input").get<std::vector<std::size_t>>();
      if (dims.size() != 3) throw InputError("model input must be [rows, cols, depth]");
      m.input = {dims[0], dims[1], dims[2]};
      for (const auto& jl : j.at("layers")) {
        for (const auto& [k, _] : jl.items()) {
          if (!layer_keys.count(k)) throw InputError("unknown layer key '" + k + "'");
        }
        LayerSpec l;
        l.kind = parse_kind(jl.at("type").get<std::string>());
        if (l.kind == LayerKind::conv) l.kernels = jl.at("kernels").get<std::size_t>();
        if (l.kind == LayerKind::dense) l.kernels = jl.at("units").get<std::size_t>();
        l.window = jl.value("window", std::size_t{1});
        l.stride = jl.value("stride", std::size_t{1});
        l.pad = jl.value("pad", std::size_t{0});
        l.activation = parse_activation(jl.value("activation", std::string("linear")));
        m.layers.push_back(l);
      }
      m.shapes();  // validates the chain
      return m;
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("model spec: ") + e.what());
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["name"] = name;
    j["input"] = {input.rows, input.cols, input.depth};
    j["layers"] = nlohmann::json::array();
    for (const auto& l : layers) {
      nlohmann::json jl;
      jl["type"] = kind_name(l.kind);
      if (l.kind == LayerKind::conv) jl["kernels"] = l.kernels;
      if (l.kind == LayerKind::dense) {
        jl["units"] = l.kernels;
      } else {
        jl["window"] = l.window;
        jl["stride"] = l.stride;
        jl["pad"] = l.pad;
      }
      if (l.kind != LayerKind::maxpool && l.kind != LayerKind::minpool && l.kind != LayerKind::avgpool) {
        jl["activation"] = activation_name(l.activation);
      }
      j["layers"].push_back(jl);
    }
    return j;
  }

  static ModelSpec parse(const std::string& text) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("model spec is not valid JSON: ") + e.what());
    }
    return from_json(j);
  }

  static ModelSpec load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open model spec '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write model spec '" + path + "'");
    out << to_json().dump(2) << "\n";
  }
};

}  // namespace cnna
