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
 * OPTQ (GPTQ) greedy quantization of a weight vector w against calibration
 * data X, in two interchangeable formulations:
 *
 *  - Cholesky: with H^{-1} = (X^T X + lambda I)^{-1} = L L^T, after rounding
 *    coordinate t the trailing weights move by (q_t - w_t) L_{>t,t} / L_tt.
 *  - LeastSquares: the trailing weights move by the minimal-norm solution of
 *    min_v ||(q_t - w_t) X_t + X_{>t} v||, computed from an SVD of the
 *    trailing block. For lambda > 0 this runs on [X; sqrt(lambda) I].
 *
 * Both produce the same grid vector whenever X^T X + lambda I is invertible;
 * the least-squares form also covers rank-deficient X with lambda = 0.
 */

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <numeric>
#include <vector>

#include "qlab/alphabet.hpp"
#include "qlab/common.hpp"
#include "qlab/linops.hpp"
#include "qlab/parallel.hpp"
#include "qlab/rng.hpp"

namespace qlab {

/// 0.01 * ||X||_F^2 / N, the customary OPTQ dampening.
inline double default_lambda(const MatrixRef& x) {
  return 0.01 * x.squaredNorm() / static_cast<double>(x.cols());
}

class Dampening {
 public:
  static Dampening automatic() { return Dampening(true, 0.0); }
  static Dampening fixed(double lambda) {
    require(lambda >= 0.0 && std::isfinite(lambda), ErrorCode::kInvalidLambda,
            "lambda must be nonnegative and finite");
    return Dampening(false, lambda);
  }

  bool is_auto() const { return auto_; }
  double value() const { return value_; }
  double resolve(const MatrixRef& x) const { return auto_ ? default_lambda(x) : value_; }

 private:
  Dampening(bool is_auto, double value) : auto_(is_auto), value_(value) {}
  bool auto_;
  double value_;
};

enum class ColumnOrder { kNone, kDescendingNorm };
enum class Formulation { kCholesky, kLeastSquares };

struct QuantConfig {
  Dampening lambda = Dampening::automatic();
  ColumnOrder order = ColumnOrder::kNone;
  Formulation formulation = Formulation::kCholesky;
  Alphabet alphabet = Alphabet::infinite(1.0);
  RoundingMode rounding = RoundingMode::deterministic();
};

/// Per-step record of one column, in the (possibly permuted) processing order.
struct QuantTrace {
  Vector preround;              // value handed to the quantizer at step t
  Vector quantized;             // q_t
  Vector residue;               // preround - quantized
  std::vector<bool> saturated;  // preround fell outside a finite grid
  Vector error_norms;           // ||target - X w^{(t)}||_2 after step t (unaugmented X)
  bool first_step_fallback = false;

  explicit QuantTrace(Index n = 0)
      : preround(Vector::Zero(n)),
        quantized(Vector::Zero(n)),
        residue(Vector::Zero(n)),
        saturated(static_cast<std::size_t>(n), false),
        error_norms(Vector::Zero(n)) {}

  Index size() const { return preround.size(); }
  Index saturation_count() const {
    return static_cast<Index>(std::count(saturated.begin(), saturated.end(), true));
  }
};

struct QuantResult {
  Matrix q;                        // N x N', caller's row order
  std::vector<Index> permutation;  // processing position k holds caller row permutation[k]
  std::vector<QuantTrace> traces;  // one per output column
  double lambda = 0.0;             // dampening actually used
  double wall_time = 0.0;          // seconds

  Vector column(Index c = 0) const { return q.col(c); }
};

struct Reordered {
  Matrix x;
  std::vector<Index> permutation;
};

/// Stable sort of the columns by decreasing l2 norm.
inline Reordered reorder_descending(const MatrixRef& x) {
  const Vector norms = x.colwise().norm().transpose();
  std::vector<Index> perm(static_cast<std::size_t>(x.cols()));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::stable_sort(perm.begin(), perm.end(),
                   [&](Index a, Index b) { return norms(a) > norms(b); });
  Reordered out{Matrix(x.rows(), x.cols()), perm};
  for (Index k = 0; k < x.cols(); ++k) out.x.col(k) = x.col(perm[static_cast<std::size_t>(k)]);
  return out;
}

inline std::vector<Index> identity_permutation(Index n) {
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  return perm;
}

inline Matrix permute_columns(const MatrixRef& x, const std::vector<Index>& perm) {
  Matrix out(x.rows(), x.cols());
  for (Index k = 0; k < x.cols(); ++k) out.col(k) = x.col(perm[static_cast<std::size_t>(k)]);
  return out;
}

inline Matrix permute_rows(const MatrixRef& w, const std::vector<Index>& perm) {
  Matrix out(w.rows(), w.cols());
  for (Index k = 0; k < w.rows(); ++k) out.row(k) = w.row(perm[static_cast<std::size_t>(k)]);
  return out;
}

inline Matrix unpermute_rows(const MatrixRef& w, const std::vector<Index>& perm) {
  Matrix out(w.rows(), w.cols());
  for (Index k = 0; k < w.rows(); ++k) out.row(perm[static_cast<std::size_t>(k)]) = w.row(k);
  return out;
}

namespace detail {

/// After coordinate t is rounded, w_{>t} += gains[t] * (q_t - w_t).
struct UpdateRule {
  std::vector<Vector> gains;
};

inline UpdateRule cholesky_rule(const CholeskyFactor& factor) {
  const Index n = factor.lower.cols();
  UpdateRule rule;
  rule.gains.reserve(static_cast<std::size_t>(n));
  for (Index t = 0; t < n; ++t)
    rule.gains.push_back(factor.lower.col(t).tail(n - t - 1) / factor.lower(t, t));
  return rule;
}

inline UpdateRule least_squares_rule(const Matrix& xe) {
  const Index n = xe.cols();
  UpdateRule rule;
  rule.gains.reserve(static_cast<std::size_t>(n));
  for (Index t = 0; t < n; ++t)
    rule.gains.push_back(-ls_solve_minnorm(xe.rightCols(n - t - 1), xe.col(t)));
  return rule;
}

inline Rounded round_value(double z, const Alphabet& a, const RoundingMode& mode,
                           CounterRng& rng) {
  return mode.is_stochastic() ? stoc_checked(z, a, rng) : msq_checked(z, a);
}

/// Sets w(t) = q_t and records step t in the trace.
inline double quantize_coordinate(Index t, double pre, Vector& w, const Alphabet& a,
                                  const RoundingMode& mode, CounterRng& rng,
                                  QuantTrace& trace) {
  const Rounded r = round_value(pre, a, mode, rng);
  trace.preround(t) = pre;
  trace.quantized(t) = r.value;
  trace.residue(t) = pre - r.value;
  trace.saturated[static_cast<std::size_t>(t)] = r.saturated;
  w(t) = r.value;
  return r.value;
}

/**
 * Greedy steps start..N-1 on the state vector w (modified in place). After
 * each step the residual ||target - data * w||_2 is recorded.
 */
inline void run_steps(const UpdateRule& rule, Index start, Vector& w, const Alphabet& a,
                      const RoundingMode& mode, CounterRng& rng, const Vector& target,
                      const Matrix& data, QuantTrace& trace) {
  const Index n = w.size();
  for (Index t = start; t < n; ++t) {
    const double pre = w(t);
    const double q = quantize_coordinate(t, pre, w, a, mode, rng, trace);
    if (t + 1 < n) w.tail(n - t - 1) += rule.gains[static_cast<std::size_t>(t)] * (q - pre);
    trace.error_norms(t) = (target - data * w).norm();
  }
}

}  // namespace detail

/**
 * Factorization and ordering for one calibration matrix, reusable across
 * weight matrices and rounding seeds.
 */
class OptqPlan {
 public:
  OptqPlan(const MatrixRef& x, const QuantConfig& cfg) : cfg_(cfg) {
    require(x.rows() > 0 && x.cols() > 0, ErrorCode::kDimensionMismatch,
            "calibration matrix must be non-empty");
    lambda_ = cfg.lambda.resolve(x);
    if (cfg.order == ColumnOrder::kDescendingNorm) {
      auto sorted = reorder_descending(x);
      xp_ = std::move(sorted.x);
      perm_ = std::move(sorted.permutation);
    } else {
      xp_ = x;
      perm_ = identity_permutation(x.cols());
    }
    if (cfg.formulation == Formulation::kCholesky) {
      rule_ = detail::cholesky_rule(cholesky_inverse_hessian(xp_, lambda_));
    } else {
      rule_ = detail::least_squares_rule(lambda_ > 0.0 ? augment(xp_, lambda_) : xp_);
    }
  }

  const QuantConfig& config() const { return cfg_; }
  double lambda() const { return lambda_; }
  const std::vector<Index>& permutation() const { return perm_; }
  const Matrix& permuted_x() const { return xp_; }

  QuantResult quantize(const MatrixRef& w, std::size_t threads = 1) const {
    return quantize(w, cfg_.rounding, threads);
  }

  /// Column c draws from stream c of `rounding.seed`, so results do not depend on `threads`.
  QuantResult quantize(const MatrixRef& w, const RoundingMode& rounding,
                       std::size_t threads) const {
    const Index n = xp_.cols();
    require(w.rows() == n, ErrorCode::kDimensionMismatch,
            "weights have " + std::to_string(w.rows()) + " rows, expected " + std::to_string(n));
    const auto start = std::chrono::steady_clock::now();
    const Matrix wp = permute_rows(w, perm_);
    Matrix qp(n, w.cols());
    std::vector<QuantTrace> traces(static_cast<std::size_t>(w.cols()));

    parallel_for(static_cast<std::size_t>(w.cols()), threads, [&](std::size_t c) {
      const Index col = static_cast<Index>(c);
      CounterRng rng(rounding.seed, c);
      QuantTrace trace(n);
      Vector state = wp.col(col);
      const Vector target = xp_ * state;
      detail::run_steps(rule_, 0, state, cfg_.alphabet, rounding, rng, target, xp_, trace);
      qp.col(col) = state;
      traces[c] = std::move(trace);
    });

    QuantResult out;
    out.q = unpermute_rows(qp, perm_);
    out.permutation = perm_;
    out.traces = std::move(traces);
    out.lambda = lambda_;
    out.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
  }

 private:
  QuantConfig cfg_;
  double lambda_ = 0.0;
  std::vector<Index> perm_;
  Matrix xp_;
  detail::UpdateRule rule_;
};

inline QuantResult optq_column(const MatrixRef& x, const VectorRef& w, const QuantConfig& cfg) {
  require(w.size() == x.cols(), ErrorCode::kDimensionMismatch,
          "weight vector length does not match the number of columns of X");
  return OptqPlan(x, cfg).quantize(Matrix(w), 1);
}

inline QuantResult optq_layer(const MatrixRef& x, const MatrixRef& w, const QuantConfig& cfg,
                              std::size_t threads = 1) {
  return OptqPlan(x, cfg).quantize(w, threads);
}

/// Realized error X w - X q and its split into per-step projected residues.
struct ErrorDecomposition {
  Vector error;
  std::vector<Vector> terms;

  Vector sum() const {
    Vector s = Vector::Zero(error.size());
    for (const auto& t : terms) s += t;
    return s;
  }
};

/**
 * Recomputes e_N = X w - X q directly and as sum_j r_j P_{X_{>j}^perp} X_j
 * from the trace of `column`. With lambda > 0 both sides live on the
 * augmented matrix [X; sqrt(lambda) I]; the trace order (after any column
 * reordering) is used throughout.
 */
inline ErrorDecomposition error_decomposition(const MatrixRef& x, const VectorRef& w,
                                              const QuantResult& result, Index column = 0) {
  require(column >= 0 && static_cast<std::size_t>(column) < result.traces.size(),
          ErrorCode::kTraceMissing, "no trace recorded for column " + std::to_string(column));
  const QuantTrace& trace = result.traces[static_cast<std::size_t>(column)];
  const Index n = x.cols();
  require(w.size() == n && result.q.rows() == n, ErrorCode::kDimensionMismatch,
          "weights, result and X disagree on N");
  require(trace.size() == n && result.permutation.size() == static_cast<std::size_t>(n),
          ErrorCode::kTraceMissing, "trace length does not match N");

  const Matrix xp = permute_columns(x, result.permutation);
  const Matrix xe = result.lambda > 0.0 ? augment(xp, result.lambda) : xp;
  const Vector wp = permute_rows(Matrix(w), result.permutation).col(0);
  const Vector qp = permute_rows(result.q.col(column), result.permutation).col(0);

  ErrorDecomposition out;
  out.error = xe * (wp - qp);
  out.terms.reserve(static_cast<std::size_t>(n));
  for (Index j = 0; j < n; ++j)
    out.terms.push_back(trace.residue(j) * project_residual(xe.rightCols(n - j - 1), xe.col(j)));
  return out;
}

}  // namespace qlab
