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

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cnna/accel/actors.hpp"
#include "cnna/accel/config.hpp"
#include "cnna/sim/network.hpp"

namespace cnna {

struct ExecOptions {
  sim::Interleaving interleaving = sim::Interleaving::round_robin();
  sim::Trace* trace = nullptr;
};

struct PassResult {
  std::vector<Raw> y;
  PassActivity activity;
  std::uint64_t cycles = 0;  // analytical, see CycleModel
  std::uint64_t steps = 0;   // actor resumptions taken by the simulation
};

// Runs one accelerator pass. `w` is the packed weight stream
// (pack_weight_stream), empty for pooling; `xbuf` is the previous stitched
// output, empty unless ctrl.uses_xbuf().
inline PassResult cnna_execute(const CnnaConfig& cfg, const LayerCtrl& ctrl, std::span<const Raw> x,
                               std::span<const Raw> w, std::span<const Raw> xbuf, ExecOptions opt = {}) {
  cfg.validate();
  ctrl.validate(cfg);
  const bool uses_pe = ctrl.op != OpKind::pool;
  if (!uses_pe && !w.empty()) throw SimulationFault("pooling pass was given weights");
  if (uses_pe && w.empty()) throw SimulationFault("weight stream is empty");
  if (!ctrl.uses_xbuf() && !xbuf.empty()) throw SimulationFault("stitch stream length mismatch: X buf not expected");
  if (ctrl.uses_xbuf() && xbuf.empty()) throw SimulationFault("stitch stream length mismatch: X buf underrun");
  if (x.empty()) throw SimulationFault("input stream length mismatch: empty input");

  const std::size_t cap = cfg.channel_capacity;
  PacketChannel w_in("W", cap), x_in("X", cap), xbuf_in("XBUF", cap), y_out("Y", cap);
  PacketChannel windows("CLB_OUT", cap), pooled("POOL_OUT", cap);
  ResultChannel results("PEA_OUT", cap);
  std::vector<std::unique_ptr<PacketChannel>> sb_in, sb_out;
  std::vector<PacketChannel*> sb_in_ptr, sb_out_ptr;
  if (uses_pe) {
    for (std::size_t i = 0; i < cfg.pe_count; ++i) {
      sb_in.push_back(std::make_unique<PacketChannel>("WB_SPLIT_" + std::to_string(i), cap));
      sb_out.push_back(std::make_unique<PacketChannel>("WB_PE_" + std::to_string(i), cap));
      sb_in_ptr.push_back(sb_in.back().get());
      sb_out_ptr.push_back(sb_out.back().get());
    }
  }
  if (opt.trace) {
    for (auto* c : {&w_in, &x_in, &xbuf_in, &y_out, &windows, &pooled}) c->attach(opt.trace);
    results.attach(opt.trace);
    for (auto* c : sb_in_ptr) c->attach(opt.trace);
    for (auto* c : sb_out_ptr) c->attach(opt.trace);
  }

  PassResult res;
  {
    sim::Network net;
    net.attach(opt.trace);
    net.spawn("dma_x", actors::dma_source(x_in, std::vector<Raw>(x.begin(), x.end()), cfg.pe_bw));
    net.spawn("clb", actors::clb(cfg, ctrl, x_in, windows));
    if (uses_pe) {
      net.spawn("dma_w", actors::dma_source(w_in, std::vector<Raw>(w.begin(), w.end()), cfg.pe_bw));
      net.spawn("wb_splitter", actors::wb_splitter(cfg, ctrl, w_in, sb_in_ptr));
      for (std::size_t i = 0; i < cfg.pe_count; ++i) {
        net.spawn("stream_buffer_" + std::to_string(i), actors::stream_buffer(cfg, ctrl, i, *sb_in[i], *sb_out[i]));
      }
      net.spawn("pe_array", actors::pe_array(cfg, ctrl, windows, sb_out_ptr, results));
    } else {
      net.spawn("pooling", actors::pooling(ctrl, windows, pooled));
    }
    if (ctrl.uses_xbuf()) {
      net.spawn("dma_xbuf", actors::dma_source(xbuf_in, std::vector<Raw>(xbuf.begin(), xbuf.end()), cfg.pe_bw));
    }
    net.spawn("output_handler", actors::output_handler(cfg, ctrl, uses_pe ? &results : nullptr,
                                                       uses_pe ? nullptr : &pooled,
                                                       ctrl.uses_xbuf() ? &xbuf_in : nullptr, y_out));
    net.spawn("dma_y", actors::dma_sink(y_out, res.y));
    res.steps = net.run(opt.interleaving);
  }

  res.activity.w_beats = w_in.popped();
  res.activity.x_beats = x_in.popped();
  res.activity.xbuf_beats = xbuf_in.popped();
  res.activity.window_beats = windows.popped();
  res.activity.window_emissions = windows.lasts_popped();
  res.activity.y_beats = y_out.popped();
  res.cycles = pass_cycles(cfg.cycles, res.activity);
  return res;
}

}  // namespace cnna
