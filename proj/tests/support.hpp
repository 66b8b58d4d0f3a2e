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

// Case generators shared by the unit suites and the acceptance runner.

#pragma once

#include <cmath>
#include <string>

#include "cnna/cnna.hpp"
#include "cnna/synth.hpp"

#ifndef CNNA_DATA_DIR
#define CNNA_DATA_DIR "data"
#endif

namespace cnna::testing {

inline std::string data_path(const std::string& name) { return std::string(CNNA_DATA_DIR) + "/" + name; }

struct LayerCase {
  ModelSpec model;
  WeightsFile weights;
  QTensor input;
  CnnaConfig cfg;
};

// One random layer in Q2.6 or Q2.14 on a random accelerator whose weight
// buffer holds between one and all of the layer's kernels.
inline LayerCase random_layer_case(synth::Rng& rng) {
  LayerCase c;
  const FixedPointFormat fmt = synth::pick(rng, 0, 1) ? FixedPointFormat(2, 14) : FixedPointFormat(2, 6);
  c.model = synth::random_layer(rng);
  c.cfg = synth::random_config(rng, fmt);
  const auto& l = c.model.layers[0];
  if (has_weights(l.kind)) {
    const std::size_t words =
        l.kind == LayerKind::conv ? l.window * l.window * c.model.input.depth : c.model.input.size();
    c.cfg.wb_capacity_packages = packages_per_kernel(c.cfg, words) * synth::pick(rng, 1, l.kernels);
  }
  c.weights = synth::random_weights(c.model, fmt, rng, synth::pick(rng, 0, 1) == 1);
  c.input = synth::random_input(c.model.input, fmt, rng);
  return c;
}

inline std::size_t mismatches(const LayerCase& c, sim::Interleaving il = sim::Interleaving::round_robin()) {
  InferenceOptions opt;
  opt.check_oracle = true;
  opt.interleaving = il;
  return run_inference(c.model, c.weights, c.input, c.cfg, opt).mismatches;
}

// A conv layer with k * m kernels and a weight buffer sized for m of them,
// so the scheduler issues exactly k passes.
inline LayerCase random_split_conv(synth::Rng& rng, std::size_t k) {
  LayerCase c;
  const FixedPointFormat fmt = synth::pick(rng, 0, 1) ? FixedPointFormat(2, 14) : FixedPointFormat(2, 6);
  const std::size_t rows = synth::pick(rng, 3, 9);
  c.model.name = "split";
  c.model.input = Shape{rows, rows, synth::pick(rng, 1, 8)};
  LayerSpec l;
  l.kind = LayerKind::conv;
  l.window = synth::pick(rng, 1, 3);
  l.pad = l.window > 1 ? synth::pick(rng, 0, 1) : 0;
  l.stride = synth::pick(rng, 1, 2);
  const std::size_t m = synth::pick(rng, 1, 3);
  l.kernels = k * m;
  l.activation = synth::pick(rng, 0, 1) ? Activation::relu : Activation::linear;
  c.model.layers.push_back(l);
  c.cfg = synth::random_config(rng, fmt);
  c.cfg.wb_capacity_packages = packages_per_kernel(c.cfg, l.window * l.window * c.model.input.depth) * m;
  c.weights = synth::random_weights(c.model, fmt, rng, synth::pick(rng, 0, 1) == 1);
  c.input = synth::random_input(c.model.input, fmt, rng);
  return c;
}

inline CnnaConfig unsplit(CnnaConfig cfg, const ModelSpec& model) {
  std::size_t most = 1;
  const auto shapes = model.shapes();
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& l = model.layers[i];
    if (!has_weights(l.kind)) continue;
    const std::size_t words = l.kind == LayerKind::conv ? l.window * l.window * shapes[i].depth : shapes[i].size();
    most = std::max(most, packages_per_kernel(cfg, words) * l.kernels);
  }
  cfg.wb_capacity_packages = most;
  return cfg;
}

// Lazy updates do W -= step each time, starting from a word on the grid; the
// stored word first changes once W crosses the rounding boundary half an
// LSB away. Landing exactly on the boundary only counts when the tie rounds
// away from the old word, i.e. when |W| is growing.
inline std::size_t lazy_steps_to_change(double w, double step, const FixedPointFormat& fmt) {
  const double n = (fmt.resolution() / 2.0) / std::abs(step);
  const bool growing = w == 0.0 || (w > 0.0) == (step < 0.0);
  return growing ? static_cast<std::size_t>(std::ceil(n)) : static_cast<std::size_t>(std::floor(n)) + 1;
}

}  // namespace cnna::testing
