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

// Host-side control: splits layers into passes that fit the weight buffer,
// assigns ping-pong stitch buffers, and drives the accelerator pass by pass
// the way the host drives its DMA channels.
//
// A conv layer split k ways alternates two buffers of the full output size:
// pass i writes buffer (i % 2) and, for i > 0, reads the other one over
// X buf, copying its first stitch_offset words of every pixel ahead of the
// new channels. A split dense layer appends each pass's units into a single
// buffer at the pass's unit offset.

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cnna/accel/cnna.hpp"
#include "cnna/accel/config.hpp"
#include "cnna/model.hpp"
#include "cnna/oracle.hpp"
#include "cnna/tensor.hpp"
#include "cnna/weights.hpp"

namespace cnna {

using BufferId = std::size_t;

struct Pass {
  LayerCtrl ctrl;
  std::size_t first_kernel = 0;
  std::size_t kernel_count = 0;
  BufferId input = 0;
  BufferId output = 0;
  std::optional<BufferId> xbuf;
  std::size_t output_offset = 0;  // words into the output buffer
};

struct LayerPlan {
  std::size_t layer = 0;
  LayerKind kind = LayerKind::conv;
  Shape in;
  Shape out;
  std::vector<Pass> passes;
  BufferId result = 0;
};

struct ExecutionPlan {
  std::vector<LayerPlan> layers;
  std::vector<std::size_t> buffer_words;  // buffer 0 is the network input

  std::size_t total_passes() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.passes.size();
    return n;
  }
};

// Largest number of kernels of `kernel_words` words one pass can hold.
inline std::size_t kernels_per_pass(const CnnaConfig& cfg, std::size_t kernel_words) {
  const std::size_t n = cfg.wb_capacity_packages / packages_per_kernel(cfg, kernel_words);
  if (n == 0) {
    throw InputError("kernel too large for configuration: " + std::to_string(kernel_words) + " words need " +
                     std::to_string(packages_per_kernel(cfg, kernel_words)) + " packages, capacity " +
                     std::to_string(cfg.wb_capacity_packages));
  }
  return n;
}

inline ExecutionPlan plan_model(const ModelSpec& model, const CnnaConfig& cfg) {
  cfg.validate();
  const auto shapes = model.shapes();
  ExecutionPlan plan;
  plan.buffer_words.push_back(model.input.size());
  BufferId current = 0;
  auto new_buffer = [&](std::size_t words) {
    plan.buffer_words.push_back(words);
    return plan.buffer_words.size() - 1;
  };

  for (std::size_t li = 0; li < model.layers.size(); ++li) {
    const auto& l = model.layers[li];
    LayerPlan lp;
    lp.layer = li;
    lp.kind = l.kind;
    lp.in = shapes[li];
    lp.out = shapes[li + 1];

    LayerCtrl base;
    base.activation = l.activation;
    if (l.kind == LayerKind::dense) {
      base.op = OpKind::dense;
      base.row_size = 1;
      base.depth = lp.in.size();
    } else {
      base.op = l.kind == LayerKind::conv ? OpKind::conv : OpKind::pool;
      base.row_size = lp.in.rows;
      base.depth = lp.in.depth;
      base.window = l.window;
      base.stride = l.stride;
      base.zero_pad = l.pad;
    }

    if (is_pool(l.kind)) {
      base.pool = oracle::pool_kind_of(l.kind);
      base.activation = Activation::linear;
      Pass p{base, 0, 0, current, new_buffer(lp.out.size()), std::nullopt, 0};
      lp.result = p.output;
      lp.passes.push_back(p);
    } else {
      const std::size_t kernels = l.kernels;
      const std::size_t per_pass = kernels_per_pass(cfg, base.window_words());
      const std::size_t splits = ceil_div(kernels, per_pass);
      const std::size_t even = kernels / splits;
      const std::size_t extra = kernels % splits;
      std::vector<BufferId> out_buffers{new_buffer(lp.out.size())};
      if (l.kind == LayerKind::conv && splits > 1) out_buffers.push_back(new_buffer(lp.out.size()));
      std::size_t first = 0;
      for (std::size_t s = 0; s < splits; ++s) {
        Pass p;
        p.ctrl = base;
        p.kernel_count = even + (s < extra ? 1 : 0);
        p.first_kernel = first;
        p.ctrl.kernels_in_pass = p.kernel_count;
        p.ctrl.replay = ceil_div(p.kernel_count, cfg.pe_count);
        p.ctrl.split = {s, splits, l.kind == LayerKind::conv ? first : 0};
        p.input = current;
        if (l.kind == LayerKind::conv) {
          p.output = out_buffers[s % 2];
          if (s > 0) p.xbuf = out_buffers[(s - 1) % 2];
        } else {
          p.output = out_buffers[0];
          p.output_offset = first;
        }
        first += p.kernel_count;
        lp.passes.push_back(p);
      }
      lp.result = lp.passes.back().output;
    }
    current = lp.result;
    plan.layers.push_back(std::move(lp));
  }
  return plan;
}

struct InferenceOptions {
  bool check_oracle = false;
  bool float_reference = false;
  sim::Interleaving interleaving = sim::Interleaving::round_robin();
  sim::Trace* trace = nullptr;
  std::optional<std::size_t> trace_layer;  // trace only this layer's passes
};

struct InferenceResult {
  QTensor output;
  std::uint64_t cycles = 0;
  std::vector<std::uint64_t> layer_cycles;
  std::size_t passes = 0;
  std::optional<QTensor> oracle;
  std::size_t mismatches = 0;
  std::optional<Tensor<double>> float_output;

  std::vector<double> values() const { return output.dequantize(); }
};

inline InferenceResult run_inference(const ModelSpec& model, const WeightsFile& weights, const QTensor& input,
                                     const CnnaConfig& cfg, const InferenceOptions& opt = {}) {
  weights.check_against(model);
  if (!(weights.format == cfg.format)) {
    throw InputError("weights are " + weights.format.str() + " but the accelerator is " + cfg.format.str());
  }
  if (!(input.format == cfg.format)) throw InputError("input format does not match accelerator");
  if (!(input.shape() == model.input)) throw InputError("input is " + input.shape().str() + ", model expects " + model.input.str());

  const auto plan = plan_model(model, cfg);
  std::vector<std::vector<Raw>> buffers;
  for (auto words : plan.buffer_words) buffers.emplace_back(words, 0);
  buffers[0] = input.words.data();
  std::vector<std::size_t> valid(buffers.size(), 0);
  valid[0] = buffers[0].size();

  InferenceResult res;
  for (const auto& lp : plan.layers) {
    const auto& lw = weights.layers[lp.layer];
    std::uint64_t layer_cycles = 0;
    for (const auto& pass : lp.passes) {
      if (pass.output == pass.input || (pass.xbuf && *pass.xbuf == pass.output)) {
        throw SimulationFault("pass would read its own output buffer");
      }
      LayerCtrl ctrl = pass.ctrl;
      std::vector<Raw> w;
      if (ctrl.op != OpKind::pool) {
        ctrl.scale = lw.scale;
        const std::size_t len = lw.kernel_words();
        w = pack_weight_stream(cfg, std::span<const Raw>(lw.bias).subspan(pass.first_kernel, pass.kernel_count),
                               std::span<const Raw>(lw.kernels).subspan(pass.first_kernel * len, pass.kernel_count * len),
                               len);
      }
      const auto& x = buffers[pass.input];
      if (valid[pass.input] != ctrl.input_words()) throw SimulationFault("input buffer holds the wrong word count");
      std::span<const Raw> xbuf;
      if (pass.xbuf) {
        const std::size_t need = ctrl.windows() * ctrl.split.stitch_offset_words;
        if (valid[*pass.xbuf] != need) throw SimulationFault("stitch buffer holds the wrong word count");
        xbuf = std::span<const Raw>(buffers[*pass.xbuf]).first(need);
      }
      ExecOptions eo{opt.interleaving, nullptr};
      if (!opt.trace_layer || *opt.trace_layer == lp.layer) eo.trace = opt.trace;
      auto r = cnna_execute(cfg, ctrl, x, w, xbuf, eo);
      if (r.y.size() != ctrl.output_words()) throw SimulationFault("output stream length mismatch");
      auto& out = buffers[pass.output];
      if (pass.output_offset + r.y.size() > out.size()) throw SimulationFault("output buffer overrun");
      std::copy(r.y.begin(), r.y.end(), out.begin() + static_cast<std::ptrdiff_t>(pass.output_offset));
      valid[pass.output] = lp.kind == LayerKind::dense ? pass.output_offset + r.y.size() : r.y.size();
      layer_cycles += r.cycles;
      ++res.passes;
    }
    if (valid[lp.result] != lp.out.size()) throw SimulationFault("layer result is incomplete");
    res.layer_cycles.push_back(layer_cycles);
    res.cycles += layer_cycles;
  }
  const auto& final_plan = plan.layers.back();
  res.output = QTensor{Tensor<Raw>(final_plan.out, buffers[final_plan.result]), cfg.format};

  if (opt.check_oracle) {
    res.oracle = oracle::run_model_fixed(model, weights, input);
    for (std::size_t i = 0; i < res.output.words.size(); ++i) {
      if (res.output.words[i] != res.oracle->words[i]) ++res.mismatches;
    }
  }
  if (opt.float_reference) {
    std::vector<double> in(input.words.size());
    for (std::size_t i = 0; i < in.size(); ++i) in[i] = input.value(i);
    res.float_output = oracle::run_model_float(model, weights, Tensor<double>(input.shape(), std::move(in)));
  }
  return res;
}

inline InferenceResult run_inference(const ModelSpec& model, const WeightsFile& weights, const Tensor<float>& input,
                                     const CnnaConfig& cfg, const InferenceOptions& opt = {}) {
  return run_inference(model, weights, quantize_tensor(input, cfg.format), cfg, opt);
}

}  // namespace cnna
