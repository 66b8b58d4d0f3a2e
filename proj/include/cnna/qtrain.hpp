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

// Quantization-aware training of a tiny MLP on 2-D blobs.
//
// Fixed-point runs evaluate the network exactly like the accelerator would
// (oracle::dense_fixed on the stored words and scale word) and back-propagate
// in double through that quantized forward pass, treating every quantizer as
// the identity. Two update rules:
//   naive  WQ <- Q(WQ - a*g)                 only the quantized words exist
//   lazy   W  <- W - a*g;  WQ <- Q(W)         a float master copy is kept

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include "cnna/fxp.hpp"
#include "cnna/oracle.hpp"
#include "cnna/weights.hpp"

namespace cnna::qtrain {

// ---------------------------------------------------------------------------
// Update rules

struct ShadowWeights {
  std::vector<double> W;   // float master copy
  std::vector<Raw> WQ;     // words used by the forward pass
  double alpha = 0.01;
  FixedPointFormat format;
  double divisor = 1.0;    // layer scale the words are stored relative to

  static ShadowWeights make(std::vector<double> w, double alpha, const FixedPointFormat& fmt) {
    ShadowWeights sw{std::move(w), {}, alpha, fmt, 1.0};
    sw.sync();
    return sw;
  }

  void sync() {
    WQ.resize(W.size());
    for (std::size_t i = 0; i < W.size(); ++i) WQ[i] = quantize_raw(W[i] / divisor, format);
  }

  double forward_value(std::size_t i) const { return to_real(WQ[i], format); }
};

inline FixedWord sgd_step_naive(const FixedWord& w, double grad, double alpha) {
  return quantize(w.value() - alpha * grad, w.format);
}

// Words are relative to `divisor`; the update happens on the real weight.
inline std::vector<Raw> sgd_step_naive(std::span<const Raw> w, std::span<const double> grad, double alpha,
                                       const FixedPointFormat& fmt, double divisor = 1.0) {
  if (w.size() != grad.size()) throw InputError("gradient size mismatch");
  std::vector<Raw> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    out[i] = quantize_raw((to_real(w[i], fmt) * divisor - alpha * grad[i]) / divisor, fmt);
  }
  return out;
}

inline ShadowWeights sgd_step_lazy(ShadowWeights sw, std::span<const double> grad) {
  if (sw.W.size() != grad.size()) throw InputError("gradient size mismatch");
  for (std::size_t i = 0; i < sw.W.size(); ++i) sw.W[i] -= sw.alpha * grad[i];
  sw.sync();
  return sw;
}

// ---------------------------------------------------------------------------
// Data

struct Dataset {
  std::vector<std::array<double, 2>> x;
  std::vector<std::size_t> y;
  std::size_t classes = 0;

  std::size_t size() const noexcept { return y.size(); }
};

struct BlobsOptions {
  std::size_t classes = 4;
  std::size_t per_class = 150;
  double spread = 0.7;
  double radius = 3.0;
  double val_fraction = 0.2;
  std::uint64_t seed = 1;
};

struct Split {
  Dataset train;
  Dataset val;
};

// Gaussian blobs with centres evenly spaced on a circle, min-max normalized
// to [-1, 1] per feature, shuffled and split.
inline Split make_blobs(const BlobsOptions& o) {
  if (o.classes < 2 || o.per_class == 0) throw InputError("blobs need >= 2 classes and >= 1 sample per class");
  if (!(o.val_fraction >= 0.0 && o.val_fraction < 1.0)) throw InputError("val_fraction must be in [0, 1)");
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> noise(0.0, o.spread);
  Dataset all;
  all.classes = o.classes;
  const double pi = std::acos(-1.0);
  for (std::size_t c = 0; c < o.classes; ++c) {
    const double a = 2.0 * pi * static_cast<double>(c) / static_cast<double>(o.classes);
    for (std::size_t i = 0; i < o.per_class; ++i) {
      all.x.push_back({o.radius * std::cos(a) + noise(rng), o.radius * std::sin(a) + noise(rng)});
      all.y.push_back(c);
    }
  }
  for (std::size_t f = 0; f < 2; ++f) {
    double lo = all.x[0][f], hi = all.x[0][f];
    for (const auto& p : all.x) {
      lo = std::min(lo, p[f]);
      hi = std::max(hi, p[f]);
    }
    for (auto& p : all.x) p[f] = hi > lo ? 2.0 * (p[f] - lo) / (hi - lo) - 1.0 : 0.0;
  }
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::round(o.val_fraction * static_cast<double>(all.size())));
  Split s;
  s.train.classes = s.val.classes = o.classes;
  for (std::size_t k = 0; k < order.size(); ++k) {
    auto& dst = k < n_val ? s.val : s.train;
    dst.x.push_back(all.x[order[k]]);
    dst.y.push_back(all.y[order[k]]);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Model

enum class UpdateRule { naive, lazy };

struct TrainOptions {
  std::size_t hidden = 16;
  std::size_t epochs = 60;
  std::size_t batch = 16;
  double lr = 0.01;
  double init_range = 1.0;  // hidden layer init U(-r, r) / sqrt(fan_in); the head starts at zero
  std::uint64_t seed = 1;
  std::optional<FixedPointFormat> format;  // empty: float training
  UpdateRule rule = UpdateRule::lazy;
  bool autoscale = false;
  std::optional<FixedPointFormat> scale_format;  // defaults to format
  double scale_target = 1.0;                     // largest scaled weight; headroom for the pre-scale sum
};

struct Layer {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation act = Activation::linear;
  ShadowWeights w;  // kernel-major: w.W[u * in + i]
  ShadowWeights b;
  std::optional<FixedWord> scale;

  double scale_value() const { return scale ? scale->value() : 1.0; }
  // Weight the forward pass actually sees.
  double weight(std::size_t u, std::size_t i, bool fixed) const {
    return fixed ? w.forward_value(u * in + i) * scale_value() : w.W[u * in + i];
  }
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double loss = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> curve;
  bool diverged = false;
  std::size_t word_changes = 0;  // quantized words that changed over the whole run

  double final_train_acc() const { return curve.empty() ? 0.0 : curve.back().train_acc; }
  double final_val_acc() const { return curve.empty() ? 0.0 : curve.back().val_acc; }

  void write_csv(std::ostream& os) const {
    os << "epoch,train_acc,val_acc,loss\n";
    for (const auto& e : curve) os << e.epoch << ',' << e.train_acc << ',' << e.val_acc << ',' << e.loss << '\n';
  }
};

class Mlp {
 public:
  Mlp(std::size_t inputs, std::size_t classes, const TrainOptions& opt) : opt_(opt) {
    if (opt.hidden == 0 || opt.batch == 0 || !(opt.lr > 0.0) || !(opt.scale_target > 0.0)) {
      throw InputError("hidden, batch, lr and scale_target must be positive");
    }
    fixed_ = opt.format.has_value();
    fmt_ = opt.format.value_or(FixedPointFormat(2, 14));
    scale_fmt_ = opt.scale_format.value_or(fmt_);
    std::mt19937_64 rng(opt.seed);
    const double r = opt.init_range / std::sqrt(static_cast<double>(inputs));
    std::uniform_real_distribution<double> u(-r, r);
    std::vector<double> w1(opt.hidden * inputs);
    for (auto& v : w1) v = u(rng);
    layers_.push_back(make_layer(inputs, opt.hidden, Activation::relu, std::move(w1)));
    layers_.push_back(make_layer(opt.hidden, classes, Activation::linear, std::vector<double>(classes * opt.hidden, 0.0)));
  }

  const std::vector<Layer>& layers() const noexcept { return layers_; }
  bool fixed() const noexcept { return fixed_; }

  // Activations of every layer (index 0 is the input), as the forward pass sees them.
  std::vector<std::vector<double>> forward(const std::array<double, 2>& x) const {
    std::vector<std::vector<double>> acts;
    if (fixed_) {
      QTensor a{Tensor<Raw>(Shape::vector(2)), fmt_};
      a.words[0] = quantize_raw(x[0], fmt_);
      a.words[1] = quantize_raw(x[1], fmt_);
      acts.push_back(a.dequantize());
      for (const auto& l : layers_) {
        a = oracle::dense_fixed(a, l.w.WQ, l.b.WQ, l.act, l.scale);
        acts.push_back(a.dequantize());
      }
    } else {
      acts.push_back({x[0], x[1]});
      for (const auto& l : layers_) {
        std::vector<double> z(l.out);
        for (std::size_t o = 0; o < l.out; ++o) {
          double s = l.b.W[o];
          for (std::size_t i = 0; i < l.in; ++i) s += l.w.W[o * l.in + i] * acts.back()[i];
          z[o] = l.act == Activation::relu ? std::max(s, 0.0) : s;
        }
        acts.push_back(std::move(z));
      }
    }
    return acts;
  }

  std::size_t predict(const std::array<double, 2>& x) const {
    const auto acts = forward(x);
    const auto& logits = acts.back();
    return static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
  }

  double accuracy(const Dataset& d) const {
    if (d.size() == 0) return 0.0;
    std::size_t ok = 0;
    for (std::size_t i = 0; i < d.size(); ++i) ok += predict(d.x[i]) == d.y[i] ? 1 : 0;
    return static_cast<double>(ok) / static_cast<double>(d.size());
  }

  // One SGD step on a minibatch; returns the mean cross-entropy loss.
  double step(const Dataset& d, std::span<const std::size_t> batch, std::size_t& word_changes) {
    std::vector<std::vector<double>> gw(layers_.size()), gb(layers_.size());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      gw[l].assign(layers_[l].w.W.size(), 0.0);
      gb[l].assign(layers_[l].b.W.size(), 0.0);
    }
    double loss = 0.0;
    for (auto idx : batch) {
      const auto acts = forward(d.x[idx]);
      const auto& logits = acts.back();
      const double m = *std::max_element(logits.begin(), logits.end());
      std::vector<double> delta(logits.size());
      double sum = 0.0;
      for (std::size_t k = 0; k < logits.size(); ++k) sum += delta[k] = std::exp(logits[k] - m);
      for (auto& v : delta) v /= sum;
      loss -= std::log(std::max(delta[d.y[idx]], 1e-300));
      delta[d.y[idx]] -= 1.0;
      for (std::size_t l = layers_.size(); l-- > 0;) {
        const auto& L = layers_[l];
        const auto& a_in = acts[l];
        for (std::size_t o = 0; o < L.out; ++o) {
          gb[l][o] += delta[o];
          for (std::size_t i = 0; i < L.in; ++i) gw[l][o * L.in + i] += delta[o] * a_in[i];
        }
        if (l == 0) break;
        std::vector<double> prev(L.in, 0.0);
        for (std::size_t i = 0; i < L.in; ++i) {
          for (std::size_t o = 0; o < L.out; ++o) prev[i] += L.weight(o, i, fixed_) * delta[o];
          if (layers_[l - 1].act == Activation::relu && a_in[i] <= 0.0) prev[i] = 0.0;
        }
        delta = std::move(prev);
      }
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      for (auto& g : gw[l]) g *= inv;
      for (auto& g : gb[l]) g *= inv;
      apply(layers_[l], gw[l], gb[l], word_changes);
    }
    return loss * inv;
  }

 private:
  Layer make_layer(std::size_t in, std::size_t out, Activation act, std::vector<double> w) {
    Layer l;
    l.in = in;
    l.out = out;
    l.act = act;
    l.w = ShadowWeights::make(std::move(w), opt_.lr, fmt_);
    l.b = ShadowWeights::make(std::vector<double>(out, 0.0), opt_.lr, fmt_);
    if (fixed_ && opt_.autoscale) rescale(l);
    return l;
  }

  // Per-layer scale from the current master weights and bias; words are
  // re-derived.
  void rescale(Layer& l) const {
    std::vector<double> all(l.w.W);
    all.insert(all.end(), l.b.W.begin(), l.b.W.end());
    const double s = compute_layer_scale(std::span<const double>(all), opt_.scale_target);
    l.scale = quantize(s, scale_fmt_);
    if (l.scale->raw == 0) l.scale = FixedWord{1, scale_fmt_};
    l.w.divisor = l.b.divisor = s;
    l.w.sync();
    l.b.sync();
  }

  void apply(Layer& l, std::span<const double> gw, std::span<const double> gb, std::size_t& changes) const {
    if (!fixed_) {
      for (std::size_t i = 0; i < gw.size(); ++i) l.w.W[i] -= opt_.lr * gw[i];
      for (std::size_t i = 0; i < gb.size(); ++i) l.b.W[i] -= opt_.lr * gb[i];
      return;
    }
    const auto before_w = l.w.WQ;
    const auto before_b = l.b.WQ;
    if (opt_.rule == UpdateRule::naive) {
      l.w.WQ = sgd_step_naive(l.w.WQ, gw, opt_.lr, fmt_, l.w.divisor);
      l.b.WQ = sgd_step_naive(l.b.WQ, gb, opt_.lr, fmt_, l.b.divisor);
    } else {
      l.w = sgd_step_lazy(std::move(l.w), gw);
      l.b = sgd_step_lazy(std::move(l.b), gb);
      if (opt_.autoscale) rescale(l);
    }
    for (std::size_t i = 0; i < before_w.size(); ++i) changes += before_w[i] != l.w.WQ[i] ? 1 : 0;
    for (std::size_t i = 0; i < before_b.size(); ++i) changes += before_b[i] != l.b.WQ[i] ? 1 : 0;
  }

  TrainOptions opt_;
  bool fixed_ = false;
  FixedPointFormat fmt_;
  FixedPointFormat scale_fmt_;
  std::vector<Layer> layers_;
};

inline TrainResult train_toy(const Split& data, const TrainOptions& opt) {
  if (data.train.size() == 0) throw InputError("empty training set");
  Mlp net(2, data.train.classes, opt);
  std::mt19937_64 rng(opt.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);
  TrainResult res;
  for (std::size_t e = 1; e <= opt.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t i = 0; i < order.size(); i += opt.batch) {
      const auto n = std::min(opt.batch, order.size() - i);
      loss += net.step(data.train, std::span<const std::size_t>(order).subspan(i, n), res.word_changes);
      ++batches;
    }
    loss /= static_cast<double>(batches);
    res.curve.push_back({e, net.accuracy(data.train), net.accuracy(data.val), loss});
    if (!std::isfinite(loss)) {
      res.diverged = true;
      break;
    }
  }
  return res;
}

}  // namespace cnna::qtrain
