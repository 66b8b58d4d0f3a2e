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
#include <optional>
#include <span>

#include "cnna/accel/config.hpp"
#include "cnna/fxp.hpp"
#include "cnna/model.hpp"

namespace cnna {

// One processing element: a multiplier array and summing tree feeding an
// exact accumulator. A frame is one window beat paired with one weight beat;
// the accumulator runs until the frame carrying the last flag, then the
// result is rounded, scaled and activated.
class ProcessingElement {
 public:
  explicit ProcessingElement(const FixedPointFormat& fmt) : fmt_(fmt), acc_(2 * fmt.frac_bits()) {}

  void begin(Raw bias) {
    acc_.reset();
    acc_.add_aligned(bias, fmt_.frac_bits());
  }

  void consume(std::span<const Raw> x, std::span<const Raw> w) {
    for (std::size_t i = 0; i < x.size(); ++i) acc_.add_product(x[i], w[i]);
  }

  // round(sum) -> * round(scale) -> round -> activation.
  Raw finish(const std::optional<FixedWord>& scale, Activation act) const {
    Raw q = acc_.requantize(fmt_).raw;
    if (scale) {
      WideAccum scaled(fmt_.frac_bits() + scale->format.frac_bits());
      scaled.add_product(q, scale->raw);
      q = scaled.requantize(fmt_).raw;
    }
    if (act == Activation::relu) q = std::max<Raw>(q, 0);
    return q;
  }

  const WideAccum& accumulator() const noexcept { return acc_; }

 private:
  FixedPointFormat fmt_;
  WideAccum acc_;
};

// Reduces one channel of a pooling window. `values` are the channel's words
// in window traversal order; max/min keep the first value seen on ties.
inline Raw pool_reduce(PoolKind kind, std::span<const Raw> values) {
  if (values.empty()) throw SimulationFault("empty pooling window");
  switch (kind) {
    case PoolKind::max: {
      Raw best = values[0];
      for (Raw v : values.subspan(1)) if (v > best) best = v;
      return best;
    }
    case PoolKind::min: {
      Raw best = values[0];
      for (Raw v : values.subspan(1)) if (v < best) best = v;
      return best;
    }
    case PoolKind::avg: {
      Wide sum = 0;
      for (Raw v : values) sum += v;
      return static_cast<Raw>(round_div(sum, static_cast<Wide>(values.size())));
    }
  }
  throw SimulationFault("unknown pool kind");
}

}  // namespace cnna
