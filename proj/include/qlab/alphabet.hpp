/* Copyright 2026 The qlab Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

/**
 * Quantization grids and scalar quantizers.
 *
 *   Infinite grid:         { k * step : k in Z }
 *   Finite symmetric grid: { k * step : -2^(b-1) <= k <= 2^(b-1) }, 2^b + 1 levels
 *
 * `msq` is round-to-nearest with ties resolved toward the larger grid point
 * (0.5 -> 1, -0.5 -> 0). `stoc` is the unbiased stochastic rounder; on a
 * finite grid its argument is clamped to the grid range before sampling.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "qlab/common.hpp"
#include "qlab/rng.hpp"

namespace qlab {

enum class AlphabetKind { kInfinite, kFiniteSymmetric };

class Alphabet {
 public:
  static Alphabet infinite(double step) { return Alphabet(AlphabetKind::kInfinite, step, 0); }

  static Alphabet finite(double step, int bits) {
    require(bits >= 1 && bits <= 52, ErrorCode::kInvalidArgument,
            "bit width must lie in [1, 52], got " + std::to_string(bits));
    return Alphabet(AlphabetKind::kFiniteSymmetric, step, bits);
  }

  AlphabetKind kind() const { return kind_; }
  bool is_finite() const { return kind_ == AlphabetKind::kFiniteSymmetric; }
  double step() const { return step_; }
  int bits() const { return bits_; }

  /// Largest grid index 2^(b-1); only meaningful for finite grids.
  std::int64_t max_level() const { return std::int64_t{1} << (bits_ - 1); }
  double max_value() const { return static_cast<double>(max_level()) * step_; }

  /// Number of grid points; 0 stands for "infinite".
  std::uint64_t cardinality() const {
    return is_finite() ? (std::uint64_t{1} << bits_) + 1 : 0;
  }

  /// True when z lies inside the convex hull of the grid.
  bool in_range(double z) const { return !is_finite() || std::abs(z) <= max_value(); }

  bool contains(double value) const {
    if (!std::isfinite(value)) return false;
    const double k = std::nearbyint(value / step_);
    if (is_finite() && std::abs(k) > static_cast<double>(max_level())) return false;
    return k * step_ == value;
  }

  /// k * step for the grid index k.
  double level(double k) const { return k * step_; }

 private:
  Alphabet(AlphabetKind kind, double step, int bits) : kind_(kind), step_(step), bits_(bits) {
    require(std::isfinite(step) && step > 0.0, ErrorCode::kInvalidArgument,
            "grid step must be positive and finite");
  }

  AlphabetKind kind_;
  double step_;
  int bits_;
};

enum class RoundingKind { kDeterministic, kStochastic };

struct RoundingMode {
  RoundingKind kind = RoundingKind::kDeterministic;
  std::uint64_t seed = 0;

  static RoundingMode deterministic() { return {}; }
  static RoundingMode stochastic(std::uint64_t seed) { return {RoundingKind::kStochastic, seed}; }
  bool is_stochastic() const { return kind == RoundingKind::kStochastic; }
};

/// A quantizer output together with whether the input lay outside the grid range.
struct Rounded {
  double value;
  bool saturated;
};

inline Rounded msq_checked(double z, const Alphabet& a) {
  const double delta = a.step();
  // delta * sign(z) * |floor(z / delta + 1/2)|
  const double magnitude = std::abs(std::floor(z / delta + 0.5));
  double k = z < 0.0 ? -magnitude : magnitude;
  bool saturated = false;
  if (a.is_finite()) {
    const double top = static_cast<double>(a.max_level());
    saturated = std::abs(z) > a.max_value();
    k = std::clamp(k, -top, top);
  }
  return {a.level(k) + 0.0, saturated};  // + 0.0 maps -0 to +0
}

inline double msq(double z, const Alphabet& a) { return msq_checked(z, a).value; }

inline Vector msq(const Vector& z, const Alphabet& a) {
  Vector out(z.size());
  for (Index i = 0; i < z.size(); ++i) out(i) = msq(z(i), a);
  return out;
}

inline Rounded stoc_checked(double z, const Alphabet& a, CounterRng& rng) {
  const double delta = a.step();
  bool saturated = false;
  if (a.is_finite() && std::abs(z) > a.max_value()) {
    saturated = true;
    z = std::clamp(z, -a.max_value(), a.max_value());
  }
  const double lower = std::floor(z / delta);
  const double p_lower = 1.0 - z / delta + lower;
  // Always consume one draw so stream positions do not depend on the data.
  const double u = rng.next_uniform();
  const double k = u < p_lower ? lower : lower + 1.0;
  return {a.level(k) + 0.0, saturated};
}

inline double stoc(double z, const Alphabet& a, CounterRng& rng) {
  return stoc_checked(z, a, rng).value;
}

}  // namespace qlab
