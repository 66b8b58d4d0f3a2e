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

// Q[I].[F] two's-complement fixed point: value = raw * 2^-F, with I integer
// bits (sign included) and F fractional bits. All arithmetic saturates.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "cnna/error.hpp"

namespace cnna {

using Raw = std::int32_t;
__extension__ typedef __int128 Wide;

enum class Rounding {
  half_away_from_zero,
  half_to_even,
};

class FixedPointFormat {
 public:
  static constexpr int max_word_bits = 32;

  constexpr FixedPointFormat() = default;

  constexpr FixedPointFormat(int int_bits, int frac_bits) : int_bits_(int_bits), frac_bits_(frac_bits) {
    if (int_bits < 1 || frac_bits < 0 || int_bits + frac_bits > max_word_bits) {
      throw InputError("invalid fixed-point format Q" + std::to_string(int_bits) + "." +
                       std::to_string(frac_bits));
    }
  }

  // Accepts "Q2.14" (the leading Q is optional).
  static FixedPointFormat parse(std::string_view text) {
    auto bad = [&] { return InputError("cannot parse fixed-point format '" + std::string(text) + "'"); };
    std::string_view s = text;
    if (!s.empty() && (s.front() == 'Q' || s.front() == 'q')) s.remove_prefix(1);
    const auto dot = s.find('.');
    if (dot == std::string_view::npos || dot == 0 || dot + 1 == s.size()) throw bad();
    auto parse_int = [&](std::string_view digits) {
      int v = 0;
      for (char c : digits) {
        if (c < '0' || c > '9') throw bad();
        v = v * 10 + (c - '0');
        if (v > 64) throw bad();
      }
      return v;
    };
    return FixedPointFormat(parse_int(s.substr(0, dot)), parse_int(s.substr(dot + 1)));
  }

  std::string str() const { return "Q" + std::to_string(int_bits_) + "." + std::to_string(frac_bits_); }

  constexpr int int_bits() const noexcept { return int_bits_; }
  constexpr int frac_bits() const noexcept { return frac_bits_; }
  constexpr int word_bits() const noexcept { return int_bits_ + frac_bits_; }

  constexpr std::int64_t raw_max() const noexcept { return (std::int64_t{1} << (word_bits() - 1)) - 1; }
  constexpr std::int64_t raw_min() const noexcept { return -(std::int64_t{1} << (word_bits() - 1)); }
  constexpr bool contains(std::int64_t raw) const noexcept { return raw >= raw_min() && raw <= raw_max(); }

  double q_max() const noexcept { return std::ldexp(static_cast<double>(raw_max()), -frac_bits_); }
  double q_min() const noexcept { return std::ldexp(static_cast<double>(raw_min()), -frac_bits_); }
  double resolution() const noexcept { return std::ldexp(1.0, -frac_bits_); }

  friend constexpr bool operator==(const FixedPointFormat&, const FixedPointFormat&) = default;

 private:
  int int_bits_ = 2;
  int frac_bits_ = 14;
};

struct FixedWord {
  Raw raw = 0;
  FixedPointFormat format;

  double value() const noexcept { return std::ldexp(static_cast<double>(raw), -format.frac_bits()); }

  friend bool operator==(const FixedWord&, const FixedWord&) = default;
};

inline double to_real(Raw raw, const FixedPointFormat& fmt) noexcept {
  return std::ldexp(static_cast<double>(raw), -fmt.frac_bits());
}

// Integer division rounded to nearest; den must be positive.
inline Wide round_div(Wide num, Wide den, Rounding mode = Rounding::half_away_from_zero) {
  Wide q = num / den;
  Wide r = num % den;
  const Wide twice = (r < 0 ? -r : r) * 2;
  const Wide away = num < 0 ? -1 : 1;
  if (twice > den) {
    q += away;
  } else if (twice == den) {
    if (mode == Rounding::half_away_from_zero || (q % 2 != 0)) q += away;
  }
  return q;
}

inline Raw saturate(Wide raw, const FixedPointFormat& fmt) noexcept {
  const Wide hi = fmt.raw_max();
  const Wide lo = fmt.raw_min();
  return static_cast<Raw>(std::clamp(raw, lo, hi));
}

// Eq: clamp(round(x * 2^F)) * 2^-F, returned as the raw word.
inline Raw quantize_raw(double x, const FixedPointFormat& fmt, Rounding mode = Rounding::half_away_from_zero) {
  if (!std::isfinite(x)) throw InputError("non-finite value");
  const double scaled = std::ldexp(x, fmt.frac_bits());
  double r = 0.0;
  if (mode == Rounding::half_away_from_zero) {
    r = std::round(scaled);
  } else {
    const double fl = std::floor(scaled);
    const double diff = scaled - fl;
    r = diff > 0.5 ? fl + 1.0 : diff < 0.5 ? fl : (std::fmod(fl, 2.0) == 0.0 ? fl : fl + 1.0);
  }
  r = std::clamp(r, static_cast<double>(fmt.raw_min()), static_cast<double>(fmt.raw_max()));
  return static_cast<Raw>(static_cast<std::int64_t>(r));
}

inline FixedWord quantize(double x, const FixedPointFormat& fmt, Rounding mode = Rounding::half_away_from_zero) {
  return {quantize_raw(x, fmt, mode), fmt};
}

inline double quantize_value(double x, const FixedPointFormat& fmt, Rounding mode = Rounding::half_away_from_zero) {
  return to_real(quantize_raw(x, fmt, mode), fmt);
}

// Moves a value carried with `from_frac` fractional bits onto fmt's grid.
inline Raw requantize(Wide raw, int from_frac, const FixedPointFormat& fmt,
                      Rounding mode = Rounding::half_away_from_zero) {
  const int shift = from_frac - fmt.frac_bits();
  if (shift > 0) return saturate(round_div(raw, Wide{1} << shift, mode), fmt);
  // Left shifts beyond the word are saturated before they can overflow.
  const Wide limit = Wide{1} << 96;
  if (raw > limit) return saturate(limit, fmt);
  if (raw < -limit) return saturate(-limit, fmt);
  return saturate(raw << (-shift), fmt);
}

inline FixedWord add_saturating(const FixedWord& a, const FixedWord& b) {
  if (!(a.format == b.format)) throw InputError("format mismatch in fixed-point add");
  return {saturate(Wide{a.raw} + Wide{b.raw}, a.format), a.format};
}

// Exact multiply-accumulate register. Products of two words keep all
// 2F fractional bits; nothing is rounded until requantize().
class WideAccum {
 public:
  WideAccum() = default;
  explicit WideAccum(int frac_bits) : frac_bits_(frac_bits) {}

  void add_product(Raw a, Raw b) noexcept { raw_ += Wide{a} * Wide{b}; }

  // Adds a word carried with `frac` fractional bits (frac <= frac_bits()).
  void add_aligned(Raw word, int frac) noexcept { raw_ += Wide{word} << (frac_bits_ - frac); }

  void reset() noexcept { raw_ = 0; }

  Wide raw() const noexcept { return raw_; }
  int frac_bits() const noexcept { return frac_bits_; }
  double value() const noexcept {
    return std::ldexp(static_cast<double>(raw_), -frac_bits_);
  }

  FixedWord requantize(const FixedPointFormat& fmt, Rounding mode = Rounding::half_away_from_zero) const {
    return {cnna::requantize(raw_, frac_bits_, fmt, mode), fmt};
  }

 private:
  Wide raw_ = 0;
  int frac_bits_ = 0;
};

inline WideAccum multiply_exact(const FixedWord& a, const FixedWord& b) {
  WideAccum acc(a.format.frac_bits() + b.format.frac_bits());
  acc.add_product(a.raw, b.raw);
  return acc;
}

// Bits needed to hold a sum of `terms` products of two words without overflow.
inline int accumulator_bits(const FixedPointFormat& fmt, std::uint64_t terms) noexcept {
  int guard = 0;
  while ((std::uint64_t{1} << guard) < terms) ++guard;
  return 2 * fmt.word_bits() + guard;
}

}  // namespace cnna
