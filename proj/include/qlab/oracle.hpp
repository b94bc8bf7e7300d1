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
 * Exact solver for min_{q in A^N} ||X w - X q||^2 over a finite grid.
 *
 * Depth-first enumeration on the triangular factor of a Householder QR
 * (||X v|| = ||R v||), fixing the last coordinate first so every partial sum
 * of squared rows is a lower bound on the final objective. Ties are broken
 * toward the lexicographically smallest q.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "qlab/alphabet.hpp"
#include "qlab/common.hpp"

namespace qlab {

struct IlsSolution {
  Vector q_star;
  double objective = 0.0;  // ||X w - X q_star||^2, recomputed directly
  std::uint64_t nodes_visited = 0;
};

namespace detail {

inline double ils_objective(const MatrixRef& x, const VectorRef& w, const Vector& q) {
  return (x * (w - q)).squaredNorm();
}

inline bool lex_less(const Vector& a, const Vector& b) {
  for (Index i = 0; i < a.size(); ++i) {
    if (a(i) < b(i)) return true;
    if (a(i) > b(i)) return false;
  }
  return false;
}

class SphereSearch {
 public:
  SphereSearch(const MatrixRef& x, const VectorRef& w, const Alphabet& a)
      : x_(x), w_(w), n_(x.cols()) {
    const Index k = a.max_level();
    for (Index i = -k; i <= k; ++i) levels_.push_back(a.level(static_cast<double>(i)));
    Eigen::HouseholderQR<Matrix> qr(x);
    const Index rows = std::min(x.rows(), x.cols());
    r_ = qr.matrixQR().topRows(rows).triangularView<Eigen::Upper>();
    q_ = Vector::Zero(n_);
    best_q_ = Vector::Zero(n_);
  }

  IlsSolution run() {
    descend(n_ - 1, 0.0);
    IlsSolution out;
    out.q_star = best_q_;
    out.objective = best_;
    out.nodes_visited = nodes_;
    return out;
  }

 private:
  double tolerance() const { return 1e-12 * (1.0 + best_); }

  /// Squared contribution of triangular row i once coordinates i..N-1 are fixed.
  double row_term(Index i) const {
    if (i >= r_.rows()) return 0.0;
    const Index len = n_ - i;
    const double s = r_.row(i).tail(len).dot(w_.tail(len) - q_.tail(len));
    return s * s;
  }

  void descend(Index i, double partial) {
    for (double level : levels_) {
      ++nodes_;
      q_(i) = level;
      const double next = partial + row_term(i);
      if (found_ && next > best_ + tolerance()) continue;
      if (i > 0) {
        descend(i - 1, next);
        continue;
      }
      const double obj = ils_objective(x_, w_, q_);
      if (!found_ || obj < best_ - tolerance() ||
          (obj <= best_ + tolerance() && lex_less(q_, best_q_))) {
        best_q_ = q_;
        best_ = obj;
        found_ = true;
      }
    }
  }

  MatrixRef x_;
  VectorRef w_;
  Index n_;
  Matrix r_;
  std::vector<double> levels_;
  Vector q_;
  Vector best_q_;
  double best_ = std::numeric_limits<double>::infinity();
  bool found_ = false;
  std::uint64_t nodes_ = 0;
};

}  // namespace detail

inline IlsSolution brute_force_ils(const MatrixRef& x, const VectorRef& w, const Alphabet& a,
                                   std::uint64_t budget = 10'000'000) {
  require(a.is_finite(), ErrorCode::kInvalidArgument, "exhaustive search needs a finite grid");
  require(w.size() == x.cols(), ErrorCode::kDimensionMismatch,
          "weight vector length does not match the number of columns of X");
  require(x.cols() > 0, ErrorCode::kDimensionMismatch, "need at least one column");
  double count = 1.0;
  const double card = static_cast<double>(a.cardinality());
  for (Index i = 0; i < x.cols(); ++i) count *= card;
  require(count <= static_cast<double>(budget), ErrorCode::kBudgetExceeded,
          "grid has " + std::to_string(count) + " points, budget is " + std::to_string(budget));
  return detail::SphereSearch(x, w, a).run();
}

}  // namespace qlab
