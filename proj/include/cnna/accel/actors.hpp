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

// The accelerator's blocks as process-network actors. Every actor takes its
// channels by reference; the channels must outlive the network.

#pragma once

#include <span>
#include <string>
#include <vector>

#include "cnna/accel/config.hpp"
#include "cnna/accel/pe.hpp"
#include "cnna/sim/network.hpp"

namespace cnna {

// One beat on a streaming interface.
struct StreamPacket {
  std::vector<Raw> words;
  bool last = false;
};

// Results of one window emission from the active PEs, in kernel order.
struct GroupResult {
  std::vector<Raw> values;
};

using PacketChannel = sim::Channel<StreamPacket>;
using ResultChannel = sim::Channel<GroupResult>;

// Bias packages for every kernel first (bias in word 0, rest zero), then
// each kernel zero-padded to whole packages.
inline std::vector<Raw> pack_weight_stream(const CnnaConfig& cfg, std::span<const Raw> bias,
                                           std::span<const Raw> kernels, std::size_t kernel_words) {
  const std::size_t pkg = cfg.package_words();
  const std::size_t k = bias.size();
  if (kernels.size() != k * kernel_words) throw InputError("kernel payload does not match kernel count");
  const std::size_t padded = ceil_div(kernel_words, pkg) * pkg;
  std::vector<Raw> out;
  out.reserve(k * (pkg + padded));
  for (std::size_t i = 0; i < k; ++i) {
    out.push_back(bias[i]);
    out.insert(out.end(), pkg - 1, 0);
  }
  for (std::size_t i = 0; i < k; ++i) {
    auto kern = kernels.subspan(i * kernel_words, kernel_words);
    out.insert(out.end(), kern.begin(), kern.end());
    out.insert(out.end(), padded - kernel_words, 0);
  }
  return out;
}

namespace actors {

// DMA read channel: memory buffer -> stream of `beat`-word packets.
inline sim::Process dma_source(PacketChannel& out, std::vector<Raw> words, std::size_t beat) {
  for (std::size_t i = 0; i < words.size(); i += beat) {
    const std::size_t n = std::min(beat, words.size() - i);
    StreamPacket p{std::vector<Raw>(words.begin() + static_cast<std::ptrdiff_t>(i),
                                    words.begin() + static_cast<std::ptrdiff_t>(i + n)),
                   i + n == words.size()};
    co_await out.push(std::move(p));
  }
}

// DMA write channel: drains one transfer (up to the last flag).
inline sim::Process dma_sink(PacketChannel& in, std::vector<Raw>& out) {
  for (;;) {
    StreamPacket p = co_await in.pop();
    out.insert(out.end(), p.words.begin(), p.words.end());
    if (p.last) break;
  }
}

// Weight buffer front end: resizes W beats into packages and splits them
// round-robin by kernel index over the stream buffers.
inline sim::Process wb_splitter(const CnnaConfig& cfg, const LayerCtrl& ctrl, PacketChannel& w_in,
                                std::vector<PacketChannel*> buffers) {
  const std::size_t kernels = ctrl.kernels_in_pass;
  const std::size_t ppk = packages_per_kernel(cfg, ctrl.window_words());
  if (kernels * ppk > cfg.wb_capacity_packages) {
    throw SimulationFault("weight buffer overflow: " + std::to_string(kernels * ppk) + " packages, capacity " +
                          std::to_string(cfg.wb_capacity_packages));
  }
  const std::size_t total_packages = kernels * ppk;
  const std::size_t pkg = cfg.package_words();
  bool ended = false;
  for (std::size_t p = 0; p < total_packages; ++p) {
    StreamPacket package;
    package.words.reserve(pkg);
    while (package.words.size() < pkg) {
      if (ended) throw SimulationFault("weight stream length mismatch: stream ended early");
      StreamPacket beat = co_await w_in.pop();
      if (beat.words.size() != cfg.pe_bw) throw SimulationFault("weight stream beat has wrong width");
      package.words.insert(package.words.end(), beat.words.begin(), beat.words.end());
      ended = beat.last;
    }
    const bool is_last_package = p + 1 == total_packages;
    if (is_last_package && !ended) throw SimulationFault("weight stream length mismatch: missing last flag");
    const std::size_t kernel = p < kernels ? p : (p - kernels) / (ppk - 1);
    co_await buffers[kernel % buffers.size()]->push(std::move(package));
  }
}

// Stream buffer `index`: caches its kernels, then for every window replays
// [bias package][kernel packages...] for each kernel it owns, one per replay.
inline sim::Process stream_buffer(const CnnaConfig& cfg, const LayerCtrl& ctrl, std::size_t index, PacketChannel& in,
                                  PacketChannel& to_pe) {
  const std::size_t n = cfg.pe_count;
  const std::size_t kernels = ctrl.kernels_in_pass;
  const std::size_t owned = index < kernels ? ceil_div(kernels - index, n) : 0;
  const std::size_t body = packages_per_kernel(cfg, ctrl.window_words()) - 1;
  std::vector<StreamPacket> bias(owned);
  std::vector<std::vector<StreamPacket>> cache(owned);
  for (auto& b : bias) b = co_await in.pop();
  for (auto& kern : cache) {
    for (std::size_t i = 0; i < body; ++i) {
      StreamPacket p = co_await in.pop();
      kern.push_back(std::move(p));
    }
    kern.back().last = true;
  }
  if (owned == 0) co_return;
  for (std::size_t w = 0; w < ctrl.windows(); ++w) {
    for (std::size_t r = 0; r < ctrl.replay; ++r) {
      if (r * n + index >= kernels) continue;
      bias[r].last = false;
      co_await to_pe.push(bias[r]);
      for (const auto& p : cache[r]) co_await to_pe.push(p);
    }
  }
}

// Data buffer: circular line buffers (window - 1 lines of the padded row)
// plus a window x window shift buffer. Consumes the raster stream once and
// emits every window `replay` times, in depth / row / column order.
inline sim::Process clb(const CnnaConfig& cfg, const LayerCtrl& ctrl, PacketChannel& x_in, PacketChannel& out) {
  const std::size_t win = ctrl.window;
  const std::size_t depth = ctrl.depth;
  const std::size_t padded = ctrl.padded_row();
  const std::size_t pad = ctrl.zero_pad;
  const std::size_t pkg = cfg.package_words();
  const std::size_t nlines = win - 1;

  std::vector<std::vector<Raw>> lines(nlines, std::vector<Raw>(padded * depth, 0));
  std::size_t oldest = 0;
  // shift[line age][pixel slot] holds one pixel (depth words).
  std::vector<std::vector<std::vector<Raw>>> shift(win, std::vector<std::vector<Raw>>(win, std::vector<Raw>(depth, 0)));

  StreamPacket beat;
  std::size_t pos = 0;
  bool ended = false;
  std::size_t consumed = 0;
  std::vector<Raw> pixel(depth);
  std::vector<Raw> window;
  window.reserve(ctrl.window_words());

  for (std::size_t px = 0; px < padded; ++px) {
    const bool line_inside = px >= pad && px < pad + ctrl.row_size;
    for (std::size_t py = 0; py < padded; ++py) {
      const bool inside = line_inside && py >= pad && py < pad + ctrl.row_size;
      for (std::size_t z = 0; z < depth; ++z) {
        if (!inside) {
          pixel[z] = 0;
          continue;
        }
        if (pos == beat.words.size()) {
          if (ended) throw SimulationFault("input stream length mismatch: stream shorter than row_size^2 * depth");
          beat = co_await x_in.pop();
          if (beat.words.empty() || beat.words.size() > cfg.pe_bw) throw SimulationFault("input beat has wrong width");
          pos = 0;
          ended = beat.last;
        }
        pixel[z] = beat.words[pos++];
        ++consumed;
      }
      const std::size_t slot = py % win;
      for (std::size_t l = 0; l < nlines; ++l) {
        const auto& line = lines[(oldest + l) % nlines];
        std::copy_n(line.begin() + static_cast<std::ptrdiff_t>(py * depth), depth, shift[l][slot].begin());
      }
      shift[win - 1][slot] = pixel;
      if (nlines > 0) std::copy(pixel.begin(), pixel.end(), lines[oldest].begin() + static_cast<std::ptrdiff_t>(py * depth));

      const bool emit = px + 1 >= win && py + 1 >= win && (px + 1 - win) % ctrl.stride == 0 &&
                        (py + 1 - win) % ctrl.stride == 0;
      if (emit) {
        window.clear();
        for (std::size_t wx = 0; wx < win; ++wx) {
          for (std::size_t wy = 0; wy < win; ++wy) {
            const auto& p = shift[wx][(py + 1 - win + wy) % win];
            window.insert(window.end(), p.begin(), p.end());
          }
        }
        for (std::size_t r = 0; r < ctrl.replay; ++r) {
          for (std::size_t i = 0; i < window.size(); i += pkg) {
            const std::size_t n = std::min(pkg, window.size() - i);
            StreamPacket p{std::vector<Raw>(window.begin() + static_cast<std::ptrdiff_t>(i),
                                            window.begin() + static_cast<std::ptrdiff_t>(i + n)),
                           i + n == window.size()};
            co_await out.push(std::move(p));
          }
        }
      }
    }
    if (nlines > 0) oldest = (oldest + 1) % nlines;
  }
  if (consumed != ctrl.input_words() || pos != beat.words.size() || !ended) {
    throw SimulationFault("input stream length mismatch: stream longer than row_size^2 * depth");
  }
}

// PE array: for each window emission the active PEs (kernels r*N .. r*N+N-1
// of replay round r) each take a bias package then consume the window beat
// by beat alongside their own kernel beats.
inline sim::Process pe_array(const CnnaConfig& cfg, const LayerCtrl& ctrl, PacketChannel& windows_in,
                             std::vector<PacketChannel*> from_buffers, ResultChannel& out) {
  const std::size_t n = cfg.pe_count;
  std::vector<ProcessingElement> pes(n, ProcessingElement(cfg.format));
  for (std::size_t e = 0; e < ctrl.emissions(); ++e) {
    const std::size_t r = e % ctrl.replay;
    const std::size_t active = std::min(n, ctrl.kernels_in_pass - r * n);
    for (std::size_t i = 0; i < active; ++i) {
      StreamPacket b = co_await from_buffers[i]->pop();
      if (b.last) throw SimulationFault("PE " + std::to_string(i) + " expected a bias package");
      pes[i].begin(b.words.at(0));
    }
    for (;;) {
      StreamPacket x = co_await windows_in.pop();
      for (std::size_t i = 0; i < active; ++i) {
        StreamPacket w = co_await from_buffers[i]->pop();
        // Kernels are padded to whole packages; the window's final beat may be short.
        if (w.last != x.last || w.words.size() < x.words.size() ||
            (!x.last && w.words.size() != x.words.size())) {
          throw SimulationFault("unpaired frame lengths at PE " + std::to_string(i));
        }
        pes[i].consume(x.words, std::span<const Raw>(w.words).first(x.words.size()));
      }
      if (x.last) break;
    }
    GroupResult g;
    g.values.reserve(active);
    for (std::size_t i = 0; i < active; ++i) g.values.push_back(pes[i].finish(ctrl.scale, ctrl.activation));
    co_await out.push(std::move(g));
  }
}

// Pooling block: one output pixel of `depth` channels per window.
inline sim::Process pooling(const LayerCtrl& ctrl, PacketChannel& windows_in, PacketChannel& out) {
  const std::size_t depth = ctrl.depth;
  const std::size_t positions = ctrl.window * ctrl.window;
  std::vector<Raw> window;
  std::vector<Raw> channel(positions);
  for (std::size_t w = 0; w < ctrl.windows(); ++w) {
    window.clear();
    for (;;) {
      StreamPacket p = co_await windows_in.pop();
      window.insert(window.end(), p.words.begin(), p.words.end());
      if (p.last) break;
    }
    if (window.size() != ctrl.window_words()) throw SimulationFault("pooling window has wrong length");
    StreamPacket px{std::vector<Raw>(depth), true};
    for (std::size_t z = 0; z < depth; ++z) {
      for (std::size_t i = 0; i < positions; ++i) channel[i] = window[i * depth + z];
      px.words[z] = pool_reduce(ctrl.pool, channel);
    }
    co_await out.push(std::move(px));
  }
}

// Output handler: per output pixel, the first stitch_offset_words of the
// X buf pixel, then this pass's new channels in kernel order; packed onto Y.
inline sim::Process output_handler(const CnnaConfig& cfg, const LayerCtrl& ctrl, ResultChannel* from_pe,
                                   PacketChannel* from_pool, PacketChannel* xbuf, PacketChannel& y) {
  const std::size_t total = ctrl.output_words();
  std::size_t emitted = 0;
  std::vector<Raw> pending;
  StreamPacket xb;
  std::size_t xpos = 0;
  bool xended = false;

  auto flush = [&](bool force) -> std::vector<StreamPacket> {
    std::vector<StreamPacket> beats;
    std::size_t i = 0;
    while (pending.size() - i >= cfg.pe_bw || (force && i < pending.size())) {
      const std::size_t n = std::min(cfg.pe_bw, pending.size() - i);
      emitted += n;
      beats.push_back(StreamPacket{std::vector<Raw>(pending.begin() + static_cast<std::ptrdiff_t>(i),
                                                    pending.begin() + static_cast<std::ptrdiff_t>(i + n)),
                                   emitted == total});
      i += n;
    }
    pending.erase(pending.begin(), pending.begin() + static_cast<std::ptrdiff_t>(i));
    return beats;
  };

  for (std::size_t px = 0; px < ctrl.windows(); ++px) {
    if (ctrl.uses_xbuf()) {
      for (std::size_t i = 0; i < ctrl.split.stitch_offset_words; ++i) {
        if (xpos == xb.words.size()) {
          if (xended) throw SimulationFault("stitch stream length mismatch: X buf underrun");
          xb = co_await xbuf->pop();
          xpos = 0;
          xended = xb.last;
        }
        pending.push_back(xb.words[xpos++]);
      }
    }
    if (ctrl.op == OpKind::pool) {
      StreamPacket p = co_await from_pool->pop();
      pending.insert(pending.end(), p.words.begin(), p.words.end());
    } else {
      for (std::size_t r = 0; r < ctrl.replay; ++r) {
        GroupResult g = co_await from_pe->pop();
        pending.insert(pending.end(), g.values.begin(), g.values.end());
      }
    }
    std::vector<StreamPacket> beats = flush(false);
    for (auto& b : beats) co_await y.push(std::move(b));
  }
  std::vector<StreamPacket> tail = flush(true);
  for (auto& b : tail) co_await y.push(std::move(b));
  if (ctrl.uses_xbuf() && (xpos != xb.words.size() || !xended)) {
    throw SimulationFault("stitch stream length mismatch: X buf overrun");
  }
  if (emitted != total) throw SimulationFault("output handler emitted a wrong word count");
}

}  // namespace actors
}  // namespace cnna
