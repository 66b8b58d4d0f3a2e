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

// Design-space exploration over the tuning vector
// [data_size, pe_bw, pe_count, db_out_multiplier, kernels_capacity].
//
// Latency is the analytical cycle model of the accelerator (the same
// expected_activity / pass_cycles the simulator is checked against), summed
// over the passes the scheduler would issue for each benchmark op. Resources
// are a coarse model: DSPs from MAC lanes, BRAM18 blocks from the bit
// capacity of each on-chip buffer.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "cnna/accel/config.hpp"
#include "cnna/model.hpp"
#include "cnna/scheduler.hpp"

namespace cnna::dse {

struct DeviceProfile {
  std::string name = "ultra96";
  std::size_t dsp = 360;
  std::size_t bram18 = 432;
  double klut = 70.56;
  double clock_mhz = 100.0;

  void validate() const {
    if (dsp == 0 || bram18 == 0 || !(klut > 0.0) || !(clock_mhz > 0.0)) throw InputError("device capacities must be positive");
  }

  static DeviceProfile from_json(const nlohmann::json& j) {
    try {
      DeviceProfile d;
      d.name = j.at("name").get<std::string>();
      d.dsp = j.at("dsp").get<std::size_t>();
      d.bram18 = j.at("bram18").get<std::size_t>();
      d.klut = j.at("klut").get<double>();
      d.clock_mhz = j.at("clock_mhz").get<double>();
      d.validate();
      return d;
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("device profile: ") + e.what());
    }
  }

  static DeviceProfile load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open device profile '" + path + "'");
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError(std::string("device profile is not valid JSON: ") + e.what());
    }
  }
};

struct ResourceModel {
  std::map<std::size_t, std::size_t> macs_per_dsp{{8, 8}, {16, 16}, {32, 8}};
  std::size_t bram_bits = 18432;       // one BRAM18
  std::size_t base_bram = 16;          // DMA and control
  std::size_t pe_fifo_packages = 2;    // stream-buffer FIFO in front of each PE

  std::size_t dsp_divisor(std::size_t data_size) const {
    auto it = macs_per_dsp.find(data_size);
    if (it == macs_per_dsp.end() || it->second == 0) {
      throw InputError("no DSP packing factor for " + std::to_string(data_size) + "-bit words");
    }
    return it->second;
  }
};

struct DseModel {
  CycleModel cycles;
  ResourceModel resources;
  std::size_t reference_kernel_words = default_reference_kernel_words;

  // {"cycles": {...}, "macs_per_dsp": {"8": 8, ...}, "bram_bits": 18432,
  //  "base_bram": 16, "pe_fifo_packages": 2, "reference_kernel_words": 4608}
  static DseModel from_json(const nlohmann::json& j) {
    try {
      DseModel m;
      if (j.contains("cycles")) {
        const auto& c = j.at("cycles");
        m.cycles.pass_setup = c.value("pass_setup", m.cycles.pass_setup);
        m.cycles.window_overhead = c.value("window_overhead", m.cycles.window_overhead);
        m.cycles.pipeline_fill = c.value("pipeline_fill", m.cycles.pipeline_fill);
      }
      if (j.contains("macs_per_dsp")) {
        m.resources.macs_per_dsp.clear();
        for (const auto& [k, v] : j.at("macs_per_dsp").items()) m.resources.macs_per_dsp[std::stoul(k)] = v.get<std::size_t>();
      }
      m.resources.bram_bits = j.value("bram_bits", m.resources.bram_bits);
      m.resources.base_bram = j.value("base_bram", m.resources.base_bram);
      m.resources.pe_fifo_packages = j.value("pe_fifo_packages", m.resources.pe_fifo_packages);
      m.reference_kernel_words = j.value("reference_kernel_words", m.reference_kernel_words);
      if (m.resources.bram_bits == 0 || m.reference_kernel_words == 0) throw InputError("model constants must be positive");
      return m;
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("dse model: ") + e.what());
    } catch (const std::invalid_argument&) {
      throw InputError("dse model: macs_per_dsp keys must be word sizes");
    }
  }
};

struct BenchmarkOp {
  std::string name;
  ModelSpec model;  // a single layer
};

inline BenchmarkOp single_op(std::string name, Shape in, LayerSpec layer) {
  ModelSpec m;
  m.name = name;
  m.input = in;
  m.layers.push_back(layer);
  m.shapes();
  return {std::move(name), std::move(m)};
}

// Two convolutions, two poolings and one dense layer shaped like the tail of
// VGG16; the convolutions use the 3x3x512 reference kernel.
inline std::vector<BenchmarkOp> default_benchmark() {
  return {
      single_op("conv_14x14x512", {14, 14, 512}, {LayerKind::conv, 512, 3, 1, 1, Activation::relu}),
      single_op("maxpool_14x14x512", {14, 14, 512}, {LayerKind::maxpool, 0, 2, 2, 0, Activation::linear}),
      single_op("conv_7x7x512", {7, 7, 512}, {LayerKind::conv, 512, 3, 1, 1, Activation::relu}),
      single_op("maxpool_7x7x512", {7, 7, 512}, {LayerKind::maxpool, 0, 3, 2, 0, Activation::linear}),
      single_op("dense_4608x256", {1, 1, 4608}, {LayerKind::dense, 256, 1, 1, 0, Activation::relu}),
  };
}

struct OpCost {
  std::string name;
  std::size_t passes = 0;
  std::uint64_t cycles = 0;
  double latency_ms = 0.0;
};

struct CostEstimate {
  BetaConfig beta;
  std::vector<OpCost> ops;
  std::uint64_t cycles = 0;
  double latency_ms = 0.0;
  std::size_t dsp = 0;
  std::size_t bram = 0;
  double dsp_pct = 0.0;
  double bram_pct = 0.0;
  double resource_avg_pct = 0.0;
  bool feasible = false;
  bool pareto = false;
};

inline std::size_t bram_blocks(std::size_t bits, const ResourceModel& r) { return ceil_div(bits, r.bram_bits); }

inline std::size_t estimate_dsp(const BetaConfig& b, const ResourceModel& r) {
  return ceil_div(b.pe_count * b.pe_bw * b.db_out_multiplier, r.dsp_divisor(b.data_size));
}

inline std::size_t estimate_bram(const BetaConfig& b, const std::vector<BenchmarkOp>& workload, const DseModel& m) {
  const auto& r = m.resources;
  const std::size_t pkg = b.pe_bw * b.db_out_multiplier;
  std::size_t line_words = 0, shift_words = 0, pixel_words = 0;
  for (const auto& op : workload) {
    const auto shapes = op.model.shapes();
    for (std::size_t i = 0; i < op.model.layers.size(); ++i) {
      const auto& l = op.model.layers[i];
      const auto& in = shapes[i];
      if (l.kind != LayerKind::dense) {
        line_words = std::max(line_words, (l.window - 1) * (in.rows + 2 * l.pad) * in.depth);
        shift_words = std::max(shift_words, l.window * l.window * in.depth);
      }
      pixel_words = std::max(pixel_words, shapes[i + 1].depth);
    }
  }
  const std::size_t ds = b.data_size;
  return r.base_bram + bram_blocks(wb_capacity_packages(b, m.reference_kernel_words) * pkg * ds, r) +
         bram_blocks(line_words * ds, r) + bram_blocks(shift_words * ds, r) +
         b.pe_count * bram_blocks(r.pe_fifo_packages * pkg * ds, r) + bram_blocks(pixel_words * ds, r);
}

inline CostEstimate estimate_cost(const BetaConfig& b, const DeviceProfile& dev,
                                  const std::vector<BenchmarkOp>& workload = default_benchmark(),
                                  const DseModel& m = {}) {
  b.validate();
  dev.validate();
  CostEstimate c;
  c.beta = b;
  auto cfg = CnnaConfig::from_beta(b, std::nullopt, m.reference_kernel_words);
  cfg.cycles = m.cycles;
  const double cycles_per_ms = dev.clock_mhz * 1e3;
  for (const auto& op : workload) {
    OpCost oc;
    oc.name = op.name;
    const auto plan = plan_model(op.model, cfg);
    for (const auto& lp : plan.layers) {
      for (const auto& p : lp.passes) oc.cycles += pass_cycles(cfg.cycles, expected_activity(cfg, p.ctrl));
      oc.passes += lp.passes.size();
    }
    oc.latency_ms = static_cast<double>(oc.cycles) / cycles_per_ms;
    c.cycles += oc.cycles;
    c.ops.push_back(std::move(oc));
  }
  c.latency_ms = static_cast<double>(c.cycles) / cycles_per_ms;
  c.dsp = estimate_dsp(b, m.resources);
  c.bram = estimate_bram(b, workload, m);
  c.dsp_pct = 100.0 * static_cast<double>(c.dsp) / static_cast<double>(dev.dsp);
  c.bram_pct = 100.0 * static_cast<double>(c.bram) / static_cast<double>(dev.bram18);
  c.resource_avg_pct = 0.5 * (c.dsp_pct + c.bram_pct);
  c.feasible = c.dsp <= dev.dsp && c.bram <= dev.bram18;
  return c;
}

// ---------------------------------------------------------------------------
// Grids

struct Grid {
  std::vector<BetaConfig> candidates;

  // Either {"candidates": [[8,128,8,3,42], ...]} or a factorial grid
  // {"data_size": [...], "pe_bw": [...], "pe_count": [...], "db_out": [...], "kernels_cap": [...]}.
  static Grid from_json(const nlohmann::json& j) {
    try {
      Grid g;
      if (j.contains("candidates")) {
        for (const auto& c : j.at("candidates")) {
          const auto v = c.get<std::vector<std::size_t>>();
          if (v.size() != 5) throw InputError("each candidate needs 5 entries");
          g.candidates.push_back({v[0], v[1], v[2], v[3], v[4]});
        }
      } else {
        auto axis = [&](const char* k) { return j.at(k).get<std::vector<std::size_t>>(); };
        for (auto ds : axis("data_size"))
          for (auto bw : axis("pe_bw"))
            for (auto n : axis("pe_count"))
              for (auto db : axis("db_out"))
                for (auto k : axis("kernels_cap")) g.candidates.push_back({ds, bw, n, db, k});
      }
      if (g.candidates.empty()) throw InputError("empty grid");
      for (const auto& c : g.candidates) c.validate();
      return g;
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("grid: ") + e.what());
    }
  }

  static Grid load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open grid '" + path + "'");
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError(std::string("grid is not valid JSON: ") + e.what());
    }
  }
};

// Indices of the non-dominated rows, minimizing latency and resource average.
inline std::vector<std::size_t> pareto_front(const std::vector<CostEstimate>& table) {
  auto dominates = [](const CostEstimate& q, const CostEstimate& p) {
    return q.latency_ms <= p.latency_ms && q.resource_avg_pct <= p.resource_avg_pct &&
           (q.latency_ms < p.latency_ms || q.resource_avg_pct < p.resource_avg_pct);
  };
  std::vector<std::size_t> front;
  for (std::size_t i = 0; i < table.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < table.size() && !dominated; ++j) dominated = j != i && dominates(table[j], table[i]);
    if (!dominated) front.push_back(i);
  }
  return front;
}

// Evaluates every candidate (in parallel) and flags the Pareto front. Rows
// come back in candidate order regardless of thread count.
inline std::vector<CostEstimate> sweep(const Grid& grid, const DeviceProfile& dev,
                                       const std::vector<BenchmarkOp>& workload = default_benchmark(),
                                       const DseModel& m = {}, unsigned threads = 0) {
  if (grid.candidates.empty()) throw InputError("empty grid");
  std::vector<CostEstimate> rows(grid.candidates.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, rows.size()));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  auto work = [&](unsigned t) {
    try {
      for (std::size_t i = next++; i < rows.size(); i = next++) rows[i] = estimate_cost(grid.candidates[i], dev, workload, m);
    } catch (...) {
      errors[t] = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(work, t);
  work(0);
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (auto i : pareto_front(rows)) rows[i].pareto = true;
  return rows;
}

inline void write_csv(std::ostream& os, const std::vector<CostEstimate>& rows, bool pareto_only = false) {
  os << "data_size,pe_bw,pe_count,db_out,kernels_cap,latency_ms,dsp,bram,resource_avg_pct,feasible,pareto\n";
  for (const auto& r : rows) {
    if (pareto_only && !r.pareto) continue;
    std::ostringstream lat, avg;
    lat.setf(std::ios::fixed);
    lat.precision(4);
    lat << r.latency_ms;
    avg.setf(std::ios::fixed);
    avg.precision(2);
    avg << r.resource_avg_pct;
    os << r.beta.data_size << ',' << r.beta.pe_bw << ',' << r.beta.pe_count << ',' << r.beta.db_out_multiplier << ','
       << r.beta.kernels_capacity << ',' << lat.str() << ',' << r.dsp << ',' << r.bram << ',' << avg.str() << ','
       << (r.feasible ? 1 : 0) << ',' << (r.pareto ? 1 : 0) << '\n';
  }
}

}  // namespace cnna::dse
