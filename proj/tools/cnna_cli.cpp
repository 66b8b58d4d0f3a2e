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

// cnna: command-line front end.
//
// Exit codes: 0 ok, 2 bad input, 3 simulator invariant violated. Failures
// print one JSON line on stderr: {"error": "<kind>", "message": "..."}.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "cnna/cnna.hpp"
#include "cnna/synth.hpp"

namespace {

using namespace cnna;

constexpr int kExitBadInput = 2;
constexpr int kExitInvariant = 3;

int fail(const char* kind, const std::string& message, int code) {
  std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << '\n';
  return code;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  return out;
}

sim::Interleaving parse_interleaving(const std::string& s) {
  if (s == "round-robin") return sim::Interleaving::round_robin();
  if (s == "reverse") return sim::Interleaving::reverse();
  if (s.rfind("random:", 0) == 0) {
    try {
      return sim::Interleaving::random(std::stoull(s.substr(7)));
    } catch (const std::exception&) {
    }
  }
  throw InputError("interleaving must be round-robin, reverse or random:<seed>, got '" + s + "'");
}

// --- preprocess -----------------------------------------------------------

struct PreprocessArgs {
  std::string model, weights_in, format = "Q2.14", scale_format, out;
  bool autoscale = false;
  double scale_target = 0.0;
};

void run_preprocess(const PreprocessArgs& a) {
  const auto model = ModelSpec::load(a.model);
  const auto fw = FloatWeights::load(a.weights_in);
  PreprocessOptions opt;
  opt.format = FixedPointFormat::parse(a.format);
  opt.autoscale = a.autoscale;
  if (!a.scale_format.empty()) opt.scale_format = FixedPointFormat::parse(a.scale_format);
  if (a.scale_target > 0.0) opt.scale_target = a.scale_target;
  const auto res = preprocess_model(model, fw, opt);
  res.weights.save(a.out);
  for (std::size_t i = 0; i < res.weights.layers.size(); ++i) {
    const auto& l = res.weights.layers[i];
    if (!has_weights(l.kind)) continue;
    std::printf("layer %zu %s: scale %.9g, %zu saturated words\n", i, kind_name(l.kind), res.report.scales[i],
                res.report.saturated_words[i]);
  }
  std::printf("wrote %s\n", a.out.c_str());
}

// --- infer / simulate -----------------------------------------------------

struct InferArgs {
  std::string model, weights, input, config, out, trace, interleave = "round-robin";
  bool check_oracle = false;
  std::size_t channel_capacity = 0;
  std::size_t layer = 0;
};

struct Loaded {
  ModelSpec model;
  WeightsFile weights;
  Tensor<float> input;
  CnnaConfig cfg;
};

Loaded load_inputs(const InferArgs& a) {
  Loaded l{ModelSpec::load(a.model), WeightsFile::load(a.weights), {}, CnnaConfig::load(a.config)};
  l.input = load_f32(a.input, l.model.input);
  if (a.channel_capacity > 0) l.cfg.channel_capacity = a.channel_capacity;
  return l;
}

void run_infer(const InferArgs& a) {
  const auto in = load_inputs(a);
  InferenceOptions opt;
  opt.check_oracle = a.check_oracle;
  opt.interleaving = parse_interleaving(a.interleave);
  const auto res = run_inference(in.model, in.weights, in.input, in.cfg, opt);
  const auto values = res.values();
  for (std::size_t i = 0; i < values.size(); ++i) std::printf("score[%zu] = %.9g\n", i, values[i]);
  std::printf("passes = %zu\ncycles = %llu\n", res.passes, static_cast<unsigned long long>(res.cycles));
  if (a.check_oracle) std::printf("%zu mismatching words\n", res.mismatches);
  if (!a.out.empty()) {
    std::vector<float> f(values.begin(), values.end());
    save_f32(a.out, f);
  }
  if (a.check_oracle && res.mismatches != 0) throw SimulationFault("accelerator output differs from the oracle");
}

void run_simulate(const InferArgs& a) {
  const auto in = load_inputs(a);
  if (a.layer >= in.model.layers.size()) throw InputError("layer index out of range");
  sim::Trace trace;
  InferenceOptions opt;
  opt.interleaving = parse_interleaving(a.interleave);
  opt.trace = &trace;
  opt.trace_layer = a.layer;
  run_inference(in.model, in.weights, in.input, in.cfg, opt);
  auto out = open_out(a.trace);
  trace.write_csv(out);
  std::printf("wrote %zu events to %s\n", trace.events().size(), a.trace.c_str());
}

// --- train-toy ------------------------------------------------------------

struct TrainArgs {
  std::string dataset = "blobs", format = "Q2.14", out;
  bool lazy = false, autoscale = false;
  std::size_t epochs = 60;
  std::uint64_t seed = 1;
  double lr = 0.01;
};

void run_train(const TrainArgs& a) {
  if (a.dataset != "blobs") throw InputError("unknown dataset '" + a.dataset + "'");
  qtrain::BlobsOptions bo;
  bo.seed = a.seed;
  qtrain::TrainOptions o;
  o.epochs = a.epochs;
  o.seed = a.seed;
  o.lr = a.lr;
  if (a.format != "float") o.format = FixedPointFormat::parse(a.format);
  o.rule = a.lazy ? qtrain::UpdateRule::lazy : qtrain::UpdateRule::naive;
  o.autoscale = a.autoscale;
  const auto res = qtrain::train_toy(qtrain::make_blobs(bo), o);
  auto out = open_out(a.out);
  res.write_csv(out);
  std::printf("final train_acc %.4f val_acc %.4f, %zu word changes\n", res.final_train_acc(), res.final_val_acc(),
              res.word_changes);
  if (res.diverged) throw SimulationFault("training diverged (non-finite loss)");
}

// --- dse ------------------------------------------------------------------

struct DseArgs {
  std::string grid, device, out, constants;
  bool pareto_only = false;
  unsigned threads = 0;
};

void run_dse(const DseArgs& a) {
  const auto grid = dse::Grid::load(a.grid);
  const auto dev = dse::DeviceProfile::load(a.device);
  dse::DseModel m;
  if (!a.constants.empty()) {
    std::ifstream in(a.constants);
    if (!in) throw InputError("cannot open '" + a.constants + "'");
    try {
      m = dse::DseModel::from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError(std::string("model constants are not valid JSON: ") + e.what());
    }
  }
  const auto rows = dse::sweep(grid, dev, dse::default_benchmark(), m, a.threads);
  auto out = open_out(a.out);
  dse::write_csv(out, rows, a.pareto_only);
  std::size_t front = 0;
  for (const auto& r : rows) front += r.pareto ? 1 : 0;
  std::printf("%zu candidates, %zu on the Pareto front\n", rows.size(), front);
}

// --- gen-fixture ----------------------------------------------------------

struct FixtureArgs {
  std::string dir;
  std::uint64_t seed = 2026;
};

// A small CNN whose layers all need several passes on the fixture
// accelerator: three stitched passes for the first convolution, more for the
// second, and appended passes for the dense head.
void run_gen_fixture(const FixtureArgs& a) {
  namespace fs = std::filesystem;
  fs::create_directories(a.dir);
  ModelSpec m;
  m.name = "toy_cnn";
  m.input = {8, 8, 3};
  m.layers = {{LayerKind::conv, 12, 3, 1, 1, Activation::relu},
              {LayerKind::maxpool, 0, 2, 2, 0, Activation::linear},
              {LayerKind::conv, 8, 3, 1, 1, Activation::relu},
              {LayerKind::dense, 5, 1, 1, 0, Activation::linear}};
  m.shapes();
  synth::Rng rng(a.seed);
  const auto fw = synth::random_float_weights(m, rng, 0.4);
  const auto x = synth::random_float_input(m.input, rng, 1.0);
  const fs::path d(a.dir);
  m.save((d / "toy_model.json").string());
  fw.save((d / "toy_weights_f32.bin").string());
  save_f32((d / "toy_input.bin").string(), x.values());
  nlohmann::json cfg{{"beta", {16, 4, 2, 2, 4}}, {"format", "Q2.14"}, {"reference_kernel_words", 27}, {"channel_capacity", 4}};
  open_out((d / "toy_config.json").string()) << cfg.dump(2) << '\n';
  std::printf("wrote fixture to %s\n", a.dir.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cnna: fixed-point CNN accelerator simulator, trainer and design-space explorer"};
  app.require_subcommand(1);

  PreprocessArgs pa;
  auto* pre = app.add_subcommand("preprocess", "Quantize, auto-scale and realign float weights");
  pre->add_option("--model", pa.model, "Model spec (JSON)")->required();
  pre->add_option("--weights-in", pa.weights_in, "Float weights (CNNF)")->required();
  pre->add_option("--format", pa.format, "Fixed-point format, e.g. Q2.14");
  pre->add_flag("--autoscale", pa.autoscale, "Scale each layer to the format's range");
  pre->add_option("--scale-format", pa.scale_format, "Format of the scale words (default: --format)");
  pre->add_option("--scale-target", pa.scale_target, "Largest scaled weight (default: the format maximum)");
  pre->add_option("--out", pa.out, "Output weights file (CNNA)")->required();

  InferArgs ia;
  auto* inf = app.add_subcommand("infer", "Run a model on the simulated accelerator");
  InferArgs sa;
  auto* simc = app.add_subcommand("simulate", "Run a model and write a packet trace of one layer");
  for (auto [cmd, args] : {std::pair{inf, &ia}, std::pair{simc, &sa}}) {
    cmd->add_option("--model", args->model, "Model spec (JSON)")->required();
    cmd->add_option("--weights", args->weights, "Quantized weights (CNNA)")->required();
    cmd->add_option("--input", args->input, "Input raster, little-endian float32")->required();
    cmd->add_option("--config", args->config, "Accelerator config (JSON)")->required();
    cmd->add_option("--channel-capacity", args->channel_capacity, "Override FIFO depth in packets");
    cmd->add_option("--interleave", args->interleave, "round-robin, reverse or random:<seed>");
  }
  inf->add_flag("--check-oracle", ia.check_oracle, "Compare against the reference implementation");
  inf->add_option("--out", ia.out, "Write outputs as float32");
  simc->add_option("--trace", sa.trace, "Trace CSV path")->required();
  simc->add_option("--layer", sa.layer, "Layer to trace");

  TrainArgs ta;
  auto* tr = app.add_subcommand("train-toy", "Quantization-aware training on a toy dataset");
  tr->add_option("--dataset", ta.dataset, "Dataset (blobs)");
  tr->add_option("--format", ta.format, "Q2.6, Q2.14, ... or float");
  tr->add_flag("--lazy", ta.lazy, "Keep a float master copy of the weights");
  tr->add_flag("--autoscale", ta.autoscale, "Per-layer weight scaling");
  tr->add_option("--epochs", ta.epochs, "Epochs");
  tr->add_option("--seed", ta.seed, "Seed for data, init and shuffling");
  tr->add_option("--lr", ta.lr, "Learning rate");
  tr->add_option("--out", ta.out, "Accuracy curve CSV")->required();

  DseArgs da;
  auto* ds = app.add_subcommand("dse", "Sweep accelerator configurations");
  ds->add_option("--grid", da.grid, "Candidate grid (JSON)")->required();
  ds->add_option("--device", da.device, "Device profile (JSON)")->required();
  ds->add_option("--constants", da.constants, "Model constants (JSON)");
  ds->add_option("--threads", da.threads, "Worker threads (0: all cores)");
  ds->add_option("--out", da.out, "Output CSV")->required();
  ds->add_flag("--pareto-only", da.pareto_only, "Only write Pareto-optimal rows");

  FixtureArgs fa;
  auto* gf = app.add_subcommand("gen-fixture", "Write the toy CNN fixture files");
  gf->add_option("--out-dir", fa.dir, "Directory")->required();
  gf->add_option("--seed", fa.seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("bad_input", e.what(), kExitBadInput);
  }

  try {
    if (*pre) run_preprocess(pa);
    if (*inf) run_infer(ia);
    if (*simc) run_simulate(sa);
    if (*tr) run_train(ta);
    if (*ds) run_dse(da);
    if (*gf) run_gen_fixture(fa);
  } catch (const InputError& e) {
    return fail("bad_input", e.what(), kExitBadInput);
  } catch (const SimulationFault& e) {
    return fail("invariant", e.what(), kExitInvariant);
  } catch (const std::exception& e) {
    return fail("invariant", e.what(), kExitInvariant);
  }
  return 0;
}
