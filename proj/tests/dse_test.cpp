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

#include <gtest/gtest.h>

#include <sstream>

#include "cnna/dse.hpp"
#include "cnna/synth.hpp"
#include "support.hpp"

namespace cnna::dse {
namespace {

bool dominates(const CostEstimate& q, const CostEstimate& p) {
  return q.latency_ms <= p.latency_ms && q.resource_avg_pct <= p.resource_avg_pct &&
         (q.latency_ms < p.latency_ms || q.resource_avg_pct < p.resource_avg_pct);
}

CostEstimate row(double lat, double res) {
  CostEstimate c;
  c.latency_ms = lat;
  c.resource_avg_pct = res;
  return c;
}

TEST(Pareto, SmallTables) {
  EXPECT_EQ(pareto_front({row(1, 1)}), (std::vector<std::size_t>{0}));
  EXPECT_EQ(pareto_front({row(1, 1), row(2, 2)}), (std::vector<std::size_t>{0}));
  EXPECT_EQ(pareto_front({row(1, 2), row(2, 1)}), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(pareto_front({row(1, 1), row(1, 1)}), (std::vector<std::size_t>{0, 1}));
}

TEST(Pareto, RandomTablesAgainstBruteForce) {
  synth::Rng rng(77);
  for (int t = 0; t < 200; ++t) {
    std::vector<CostEstimate> table;
    const auto n = synth::pick(rng, 1, 40);
    for (std::size_t i = 0; i < n; ++i) {
      table.push_back(row(static_cast<double>(synth::pick(rng, 0, 10)), static_cast<double>(synth::pick(rng, 0, 10))));
    }
    const auto front = pareto_front(table);
    ASSERT_FALSE(front.empty());
    std::vector<bool> in(n, false);
    for (auto i : front) in[i] = true;
    for (std::size_t i = 0; i < n; ++i) {
      bool dominated = false;
      for (std::size_t j = 0; j < n; ++j) dominated = dominated || dominates(table[j], table[i]);
      ASSERT_EQ(in[i], !dominated);
    }
  }
}

BetaConfig random_beta(synth::Rng& rng) {
  const std::size_t sizes[] = {8, 16, 32};
  return {sizes[synth::pick(rng, 0, 2)], std::size_t{1} << synth::pick(rng, 4, 8), synth::pick(rng, 1, 32),
          synth::pick(rng, 1, 4), synth::pick(rng, 4, 64)};
}

TEST(Model, MonotoneOverRandomBeta) {
  synth::Rng rng(100);
  const DeviceProfile dev;
  const DseModel m;
  for (int t = 0; t < 100; ++t) {
    const auto b = random_beta(rng);
    const auto base = estimate_cost(b, dev);
    auto more_pe = b;
    more_pe.pe_count *= 2;
    auto wider = b;
    wider.pe_bw *= 2;
    auto bigger_wb = b;
    bigger_wb.kernels_capacity += 1;
    const auto c_pe = estimate_cost(more_pe, dev);
    const auto c_bw = estimate_cost(wider, dev);
    const auto c_wb = estimate_cost(bigger_wb, dev);
    ASSERT_LE(c_pe.cycles, base.cycles) << b.str();
    ASSERT_LE(c_bw.cycles, base.cycles) << b.str();
    for (const auto* c : {&c_pe, &c_bw, &c_wb}) {
      ASSERT_GE(c->dsp, base.dsp) << b.str();
      ASSERT_GE(c->bram, base.bram) << b.str();
    }
  }
}

TEST(Model, WeightBufferFormula) {
  EXPECT_EQ(wb_capacity_packages({8, 128, 8, 3, 42}), 13u * 42u);
  EXPECT_EQ(wb_capacity_packages({16, 128, 16, 1, 32}), 37u * 32u);
}

TEST(Model, DspColumn) {
  const ResourceModel r;
  EXPECT_EQ(estimate_dsp({8, 128, 8, 3, 42}, r), 384u);
  EXPECT_EQ(estimate_dsp({16, 128, 8, 3, 32}, r), 192u);
  EXPECT_EQ(estimate_dsp({16, 128, 16, 3, 32}, r), 384u);
  EXPECT_EQ(estimate_dsp({32, 64, 8, 1, 32}, r), 64u);
}

TEST(Sweep, TableOneGrid) {
  const auto grid = Grid::load(testing::data_path("table1_grid.json"));
  const auto dev = DeviceProfile::load(testing::data_path("ultra96.json"));
  ASSERT_EQ(grid.candidates.size(), 12u);
  const auto rows = sweep(grid, dev);
  ASSERT_EQ(rows.size(), 12u);
  std::size_t on_front = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].beta, grid.candidates[i]);
    if (!rows[i].pareto) continue;
    ++on_front;
    for (const auto& other : rows) EXPECT_FALSE(dominates(other, rows[i]));
  }
  EXPECT_GT(on_front, 0u);
  for (const auto& r : rows) {
    if (r.beta == BetaConfig{16, 128, 16, 3, 32}) {
      EXPECT_FALSE(r.feasible);
    }
    if (r.beta == BetaConfig{16, 128, 8, 3, 32}) {
      EXPECT_TRUE(r.feasible);
    }
  }
}

TEST(Sweep, ThreadCountDoesNotChangeRows) {
  const auto grid = Grid::load(testing::data_path("factorial_grid.json"));
  const DeviceProfile dev;
  std::ostringstream one, many;
  write_csv(one, sweep(grid, dev, default_benchmark(), {}, 1));
  write_csv(many, sweep(grid, dev, default_benchmark(), {}, 8));
  EXPECT_EQ(one.str(), many.str());
}

TEST(Sweep, CsvColumnsAndParetoFilter) {
  const auto rows = sweep(Grid::load(testing::data_path("table1_grid.json")), DeviceProfile{});
  std::ostringstream all, front;
  write_csv(all, rows);
  write_csv(front, rows, true);
  std::string header;
  std::istringstream in(all.str());
  std::getline(in, header);
  EXPECT_EQ(header, "data_size,pe_bw,pe_count,db_out,kernels_cap,latency_ms,dsp,bram,resource_avg_pct,feasible,pareto");
  std::size_t lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  EXPECT_EQ(lines, 12u);
  std::istringstream fin(front.str());
  std::getline(fin, header);
  for (std::string l; std::getline(fin, l);) EXPECT_EQ(l.back(), '1');
}

TEST(Config, RejectsBadFiles) {
  EXPECT_THROW(DeviceProfile::from_json(nlohmann::json::parse(R"({"name":"x"})")), InputError);
  EXPECT_THROW(Grid::from_json(nlohmann::json::parse(R"({"candidates":[[8,128,8]]})")), InputError);
  EXPECT_THROW(Grid::from_json(nlohmann::json::parse(R"({"candidates":[]})")), InputError);
  EXPECT_THROW(Grid::load("/nonexistent/grid.json"), InputError);
  const auto m = DseModel::from_json(nlohmann::json::parse(R"({"macs_per_dsp":{"16":8},"base_bram":4})"));
  EXPECT_EQ(m.resources.dsp_divisor(16), 8u);
  EXPECT_THROW(m.resources.dsp_divisor(8), InputError);
}

}  // namespace
}  // namespace cnna::dse
