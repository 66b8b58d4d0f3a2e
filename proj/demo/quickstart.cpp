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

// Builds a two-layer network in code, quantizes random weights, runs it on
// a small accelerator that has to split the convolution, and prints the
// result next to the reference implementation.

#include <cstdio>

#include "cnna/cnna.hpp"
#include "cnna/synth.hpp"

int main() {
  using namespace cnna;

  ModelSpec model;
  model.name = "quickstart";
  model.input = Shape{6, 6, 2};
  model.layers = {
      {LayerKind::conv, 6, 3, 1, 1, Activation::relu},
      {LayerKind::maxpool, 0, 2, 2, 0, Activation::linear},
      {LayerKind::dense, 3, 1, 1, 0, Activation::linear},
  };

  synth::Rng rng(1);
  PreprocessOptions pre;
  pre.format = FixedPointFormat(2, 14);
  pre.autoscale = true;
  const auto weights = preprocess_model(model, synth::random_float_weights(model, rng), pre).weights;
  const auto input = synth::random_float_input(model.input, rng);

  CnnaConfig cfg;
  cfg.pe_count = 2;
  cfg.pe_bw = 4;
  cfg.db_out_multiplier = 2;
  cfg.format = pre.format;
  cfg.wb_capacity_packages = 2 * packages_per_kernel(cfg, 3 * 3 * 2);  // two conv kernels per pass

  InferenceOptions opt;
  opt.check_oracle = true;
  const auto r = run_inference(model, weights, input, cfg, opt);

  std::printf("%zu passes, %llu modeled cycles\n", r.passes, static_cast<unsigned long long>(r.cycles));
  for (std::size_t i = 0; i < r.output.words.size(); ++i) {
    std::printf("y[%zu] = %+.6f  (reference %+.6f)\n", i, r.output.value(i), r.oracle->value(i));
  }
  std::printf("%zu mismatching words\n", r.mismatches);
  return r.mismatches == 0 ? 0 : 1;
}
