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

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cnna/error.hpp"
#include "cnna/fxp.hpp"
#include "cnna/model.hpp"

namespace cnna {

constexpr std::size_t ceil_div(std::size_t a, std::size_t b) noexcept { return (a + b - 1) / b; }

// Kernel size the weight buffer is dimensioned for (3x3x512, the largest
// VGG16 layer).
constexpr std::size_t default_reference_kernel_words = 3 * 3 * 512;

// The five structural tuning parameters:
// [data_size, pe_bw, pe_count, db_out_multiplier, kernels_capacity].
struct BetaConfig {
  std::size_t data_size = 16;
  std::size_t pe_bw = 128;
  std::size_t pe_count = 8;
  std::size_t db_out_multiplier = 3;
  std::size_t kernels_capacity = 32;

  void validate() const {
    if (data_size != 8 && data_size != 16 && data_size != 32) throw InputError("data_size must be 8, 16 or 32");
    if (pe_bw == 0 || pe_count == 0 || db_out_multiplier == 0 || kernels_capacity == 0) {
      throw InputError("beta entries must be positive");
    }
  }

  std::string str() const {
    return "[" + std::to_string(data_size) + "," + std::to_string(pe_bw) + "," + std::to_string(pe_count) + "," +
           std::to_string(db_out_multiplier) + "," + std::to_string(kernels_capacity) + "]";
  }

  friend bool operator==(const BetaConfig&, const BetaConfig&) = default;
};

// Weight-buffer size in packages:
// (ceil(reference / (db_out * pe_bw)) + bias_size) * kernels_capacity, bias_size = 1.
inline std::size_t wb_capacity_packages(const BetaConfig& b,
                                        std::size_t reference_kernel_words = default_reference_kernel_words) {
  return (ceil_div(reference_kernel_words, b.db_out_multiplier * b.pe_bw) + 1) * b.kernels_capacity;
}

// Analytical timing. All constants are in clock cycles.
struct CycleModel {
  std::uint64_t pass_setup = 64;       // control write and stream start-up
  std::uint64_t window_overhead = 40;  // per window emission: shift-buffer reposition, PE drain
  std::uint64_t pipeline_fill = 32;    // first result latency through CLB, PE tree and output handler

  friend bool operator==(const CycleModel&, const CycleModel&) = default;
};

struct CnnaConfig {
  std::size_t pe_count = 1;
  std::size_t pe_bw = 1;
  std::size_t db_out_multiplier = 1;
  std::size_t wb_capacity_packages = 1;
  FixedPointFormat format;
  std::size_t channel_capacity = 16;  // packets per FIFO
  CycleModel cycles;

  // Words per window/weight package after the data-buffer output resize.
  std::size_t package_words() const noexcept { return pe_bw * db_out_multiplier; }

  void validate() const {
    if (pe_count == 0 || pe_bw == 0 || db_out_multiplier == 0) throw InputError("pe_count, pe_bw and db_out must be >= 1");
    if (wb_capacity_packages == 0) throw InputError("weight buffer capacity must be > 0");
    if (channel_capacity == 0) throw InputError("channel capacity must be >= 1");
  }

  static CnnaConfig from_beta(const BetaConfig& b, std::optional<FixedPointFormat> fmt = std::nullopt,
                              std::size_t reference_kernel_words = default_reference_kernel_words) {
    b.validate();
    CnnaConfig c;
    c.pe_count = b.pe_count;
    c.pe_bw = b.pe_bw;
    c.db_out_multiplier = b.db_out_multiplier;
    c.wb_capacity_packages = cnna::wb_capacity_packages(b, reference_kernel_words);
    c.format = fmt.value_or(FixedPointFormat(2, static_cast<int>(b.data_size) - 2));
    if (static_cast<std::size_t>(c.format.word_bits()) != b.data_size) {
      throw InputError("format " + c.format.str() + " does not have " + std::to_string(b.data_size) + " bits");
    }
    return c;
  }

  // {"beta": [16,128,8,3,32], "format": "Q2.14", "channel_capacity": 16,
  //  "reference_kernel_words": 4608,
  //  "cycles": {"pass_setup": 64, "window_overhead": 40, "pipeline_fill": 32}}
  static CnnaConfig from_json(const nlohmann::json& j) {
    try {
      const auto v = j.at("beta").get<std::vector<std::size_t>>();
      if (v.size() != 5) throw InputError("beta must have 5 entries");
      BetaConfig b{v[0], v[1], v[2], v[3], v[4]};
      std::optional<FixedPointFormat> fmt;
      if (j.contains("format")) fmt = FixedPointFormat::parse(j.at("format").get<std::string>());
      auto c = from_beta(b, fmt, j.value("reference_kernel_words", default_reference_kernel_words));
      c.channel_capacity = j.value("channel_capacity", std::size_t{16});
      if (j.contains("cycles")) {
        const auto& jc = j.at("cycles");
        c.cycles.pass_setup = jc.value("pass_setup", c.cycles.pass_setup);
        c.cycles.window_overhead = jc.value("window_overhead", c.cycles.window_overhead);
        c.cycles.pipeline_fill = jc.value("pipeline_fill", c.cycles.pipeline_fill);
      }
      c.validate();
      return c;
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("accelerator config: ") + e.what());
    }
  }

  static CnnaConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      return from_json(nlohmann::json::parse(ss.str()));
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError(std::string("config is not valid JSON: ") + e.what());
    }
  }
};

// ---------------------------------------------------------------------------
// Per-pass control record, as written over CTRL.

enum class OpKind : std::uint8_t { conv, pool, dense };
enum class PoolKind : std::uint8_t { max, min, avg };

struct SplitInfo {
  std::size_t index = 0;
  std::size_t count = 1;
  std::size_t stitch_offset_words = 0;  // words per pixel taken from X buf

  friend bool operator==(const SplitInfo&, const SplitInfo&) = default;
};

struct LayerCtrl {
  OpKind op = OpKind::conv;
  std::size_t row_size = 1;
  std::size_t depth = 1;
  std::size_t stride = 1;
  std::size_t window = 1;
  std::size_t zero_pad = 0;
  std::size_t replay = 1;
  PoolKind pool = PoolKind::max;
  Activation activation = Activation::linear;
  std::optional<FixedWord> scale;
  SplitInfo split;
  std::size_t kernels_in_pass = 0;

  std::size_t padded_row() const noexcept { return row_size + 2 * zero_pad; }
  std::size_t out_row() const noexcept { return (padded_row() - window) / stride + 1; }
  std::size_t windows() const noexcept { return out_row() * out_row(); }
  std::size_t window_words() const noexcept { return window * window * depth; }
  std::size_t input_words() const noexcept { return row_size * row_size * depth; }
  std::size_t emissions() const noexcept { return windows() * replay; }
  std::size_t new_words_per_pixel() const noexcept { return op == OpKind::pool ? depth : kernels_in_pass; }
  std::size_t output_words_per_pixel() const noexcept { return split.stitch_offset_words + new_words_per_pixel(); }
  std::size_t output_words() const noexcept { return windows() * output_words_per_pixel(); }
  bool uses_xbuf() const noexcept { return split.index > 0 && split.stitch_offset_words > 0; }

  void validate(const CnnaConfig& cfg) const {
    auto bad = [](const std::string& m) { return SimulationFault("invalid control word: " + m); };
    if (row_size == 0 || depth == 0) throw bad("row_size and depth must be >= 1");
    if (stride == 0 || window == 0 || replay == 0) throw bad("stride, window and replay must be >= 1");
    if (window > padded_row()) throw bad("window larger than padded row");
    if (split.count == 0 || split.index >= split.count) throw bad("split index out of range");
    if (op == OpKind::pool) {
      if (replay != 1) throw bad("pooling does not replay windows");
    } else {
      if (kernels_in_pass == 0) throw bad("kernels_in_pass must be >= 1");
      if (replay != ceil_div(kernels_in_pass, cfg.pe_count)) throw bad("replay must equal ceil(kernels / pe_count)");
    }
    if (op == OpKind::dense && (row_size != 1 || window != 1 || stride != 1 || zero_pad != 0)) {
      throw bad("dense passes stream a 1x1xN vector");
    }
    if (scale && op == OpKind::pool) throw bad("pooling has no scale");
  }
};

inline std::size_t packages_per_kernel(const CnnaConfig& cfg, std::size_t kernel_words) {
  return ceil_div(kernel_words, cfg.package_words()) + 1;
}

// Beat counts seen on the accelerator's channels during one pass.
struct PassActivity {
  std::uint64_t w_beats = 0;
  std::uint64_t x_beats = 0;
  std::uint64_t xbuf_beats = 0;
  std::uint64_t window_beats = 0;
  std::uint64_t window_emissions = 0;
  std::uint64_t y_beats = 0;

  friend bool operator==(const PassActivity&, const PassActivity&) = default;
};

// Cycles = setup + weight load + max(input, window emission, stitch, output) + fill.
inline std::uint64_t pass_cycles(const CycleModel& m, const PassActivity& a) {
  const std::uint64_t compute = a.window_beats + a.window_emissions * m.window_overhead;
  return m.pass_setup + a.w_beats + std::max({a.x_beats, compute, a.xbuf_beats, a.y_beats}) + m.pipeline_fill;
}

// Closed-form activity for a pass; must agree with what the simulator counts.
inline PassActivity expected_activity(const CnnaConfig& cfg, const LayerCtrl& ctrl) {
  PassActivity a;
  if (ctrl.op != OpKind::pool) {
    a.w_beats = ctrl.kernels_in_pass * packages_per_kernel(cfg, ctrl.window_words()) * cfg.db_out_multiplier;
  }
  a.x_beats = ceil_div(ctrl.input_words(), cfg.pe_bw);
  if (ctrl.uses_xbuf()) a.xbuf_beats = ceil_div(ctrl.windows() * ctrl.split.stitch_offset_words, cfg.pe_bw);
  a.window_emissions = ctrl.emissions();
  a.window_beats = a.window_emissions * ceil_div(ctrl.window_words(), cfg.package_words());
  a.y_beats = ceil_div(ctrl.output_words(), cfg.pe_bw);
  return a;
}

}  // namespace cnna
