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
 * Worst-case inputs for deterministic OPTQ: X = H^T R with H an orthonormal
 * Hadamard matrix and R unit lower bidiagonal. With beta = sqrt(N) / 3,
 *
 *   q = -round(beta R^{-1} H_j),   w = beta R^{-1} H_j + q,
 *
 * so |w| <= 1/3 while X (w - q) = beta e_j. OPTQ returns exactly this q, giving
 * ||X (w - q)||_inf = sqrt(N) / 3 and ||w - q||_inf = N / 3.
 *
 * Two sign patterns are provided:
 *   kMonotone     R has -1 below the diagonal, j = 0 (the all-ones column);
 *                 R^{-1} is all-ones lower triangular and w - q = (1, 2, ..., N) / 3.
 *   kAlternating  R has +1 below the diagonal, j = 1; (R^{-1})_{ik} = (-1)^(i-k)
 *                 and w - q = (1, -2, 3, -4, ...) / 3.
 */

#include <cmath>
#include <string>
#include <vector>

#include "qlab/alphabet.hpp"
#include "qlab/common.hpp"
#include "qlab/optq.hpp"

namespace qlab {

inline bool is_power_of_two(Index n) { return n > 0 && (n & (n - 1)) == 0; }

/// Sylvester Hadamard matrix scaled to be orthonormal.
inline Matrix hadamard(Index n) {
  require(is_power_of_two(n), ErrorCode::kNotPowerOfTwo,
          "Hadamard order must be a power of two, got " + std::to_string(n));
  Matrix h = Matrix::Ones(1, 1);
  while (h.rows() < n) {
    const Index k = h.rows();
    Matrix next(2 * k, 2 * k);
    next << h, h, h, -h;
    h = std::move(next);
  }
  return h / std::sqrt(static_cast<double>(n));
}

enum class AdversarialVariant { kMonotone, kAlternating };

struct AdversarialInstance {
  Matrix x;           // H^T R
  Matrix h;
  Matrix r;
  Matrix r_inv;
  Vector w;
  Vector expected_q;
  double beta = 0.0;
  Index column_index = 0;  // j, 0-based
  AdversarialVariant variant = AdversarialVariant::kMonotone;
};

inline AdversarialInstance build_instance(Index n,
                                          AdversarialVariant variant = AdversarialVariant::kMonotone) {
  require(is_power_of_two(n), ErrorCode::kNotPowerOfTwo,
          "instance size must be a power of two, got " + std::to_string(n));
  require(n >= 2, ErrorCode::kInvalidArgument, "instance size must be at least 2");
  const double sub = variant == AdversarialVariant::kMonotone ? -1.0 : 1.0;

  AdversarialInstance inst;
  inst.variant = variant;
  inst.h = hadamard(n);
  inst.r = Matrix::Identity(n, n);
  for (Index i = 1; i < n; ++i) inst.r(i, i - 1) = sub;
  inst.r_inv = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k <= i; ++k) inst.r_inv(i, k) = std::pow(-sub, static_cast<double>(i - k));
  inst.column_index = variant == AdversarialVariant::kMonotone ? 0 : 1;
  inst.beta = std::sqrt(static_cast<double>(n)) / 3.0;
  inst.x = inst.h.transpose() * inst.r;

  const Vector v = inst.beta * (inst.r_inv * inst.h.col(inst.column_index));
  inst.expected_q = -msq(v, Alphabet::infinite(1.0));
  inst.w = v + inst.expected_q;
  return inst;
}

/// Deterministic, lambda = 0, infinite grid of step 1, original column order.
inline QuantConfig adversarial_config(Formulation form = Formulation::kLeastSquares) {
  QuantConfig cfg;
  cfg.lambda = Dampening::fixed(0.0);
  cfg.order = ColumnOrder::kNone;
  cfg.formulation = form;
  cfg.alphabet = Alphabet::infinite(1.0);
  cfg.rounding = RoundingMode::deterministic();
  return cfg;
}

struct ScalingRow {
  Index n = 0;
  double linf_error = 0.0;    // ||X (w - q)||_inf
  double weight_drift = 0.0;  // ||w - q||_inf
  double w_inf = 0.0;
  bool matches_expected = false;
};

inline std::vector<ScalingRow> scaling_report(
    const std::vector<Index>& sizes, AdversarialVariant variant = AdversarialVariant::kMonotone,
    Formulation form = Formulation::kCholesky) {
  std::vector<ScalingRow> rows;
  rows.reserve(sizes.size());
  for (Index n : sizes) {
    const auto inst = build_instance(n, variant);
    const auto result = optq_column(inst.x, inst.w, adversarial_config(form));
    const Vector q = result.column();
    ScalingRow row;
    row.n = n;
    row.linf_error = (inst.x * (inst.w - q)).cwiseAbs().maxCoeff();
    row.weight_drift = (inst.w - q).cwiseAbs().maxCoeff();
    row.w_inf = inst.w.cwiseAbs().maxCoeff();
    row.matches_expected = q == inst.expected_q;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace qlab
