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
 * Counter-based random numbers.
 *
 * Every draw is a pure function of (seed, stream, counter):
 *
 *   key    = mix64(seed ^ mix64(stream + kStreamSalt))
 *   out(k) = mix64(key + k * kGamma),   k = 1, 2, ...
 *
 * where mix64 is the SplitMix64 finalizer. Within a stream this is exactly
 * SplitMix64 started at `key`; distinct streams start at decorrelated keys.
 * Workers that each own a stream produce identical numbers regardless of
 * scheduling.
 */

#include <cmath>
#include <cstdint>
#include <numbers>

#include "qlab/common.hpp"

namespace qlab {

inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed for sub-experiment `index` (a Monte Carlo trial, a generated instance).
inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(master ^ mix64(index + 0x632be59bd9b4e019ULL));
}

class CounterRng {
 public:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  static constexpr std::uint64_t kStreamSalt = 0xd1b54a32d192ed03ULL;

  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_(mix64(seed ^ mix64(stream + kStreamSalt))) {}

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kGamma); }

  /// Uniform on [0, 1) with 53 random bits.
  double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; consumes two draws.
  double next_gaussian() {
    const double u1 = 1.0 - next_uniform();  // (0, 1]
    const double u2 = next_uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// i.i.d. N(0, 1) entries, filled column-major.
inline Matrix gaussian_matrix(Index rows, Index cols, std::uint64_t seed,
                              std::uint64_t stream = 0) {
  CounterRng rng(seed, stream);
  Matrix out(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) out(i, j) = rng.next_gaussian();
  return out;
}

inline Matrix uniform_matrix(Index rows, Index cols, double lo, double hi,
                             std::uint64_t seed, std::uint64_t stream = 0) {
  CounterRng rng(seed, stream);
  Matrix out(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) out(i, j) = lo + (hi - lo) * rng.next_uniform();
  return out;
}

inline Vector uniform_vector(Index n, double lo, double hi, std::uint64_t seed,
                             std::uint64_t stream = 0) {
  return uniform_matrix(n, 1, lo, hi, seed, stream).col(0);
}

}  // namespace qlab
