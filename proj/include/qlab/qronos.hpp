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
 * Qronos: quantize w against the drifted input Xt while targeting the clean
 * pre-activation X w.
 *
 * Step 1 rounds  Xt_1^T (X w - Xt_{>1} w_{>1}) / ||Xt_1||^2  and re-fits the
 * remaining weights with  w_{>1} = pinv(Xt_{>1}) (X w - q_1 Xt_1).  Steps
 * t >= 2 are ordinary OPTQ steps on Xt (Cholesky or least-squares form).
 *
 * With lambda > 0 everything runs on the augmented pair
 * ([X; sqrt(lambda) I], [Xt; sqrt(lambda) I]), which is what the dampened
 * Hessian Xt^T Xt + lambda I corresponds to.
 *
 * The `ls_init` variant first replaces w by argmin_v ||X w - Xt v|| and then
 * runs plain OPTQ steps on Xt from t = 1.
 */

#include <chrono>
#include <vector>

#include "qlab/linops.hpp"
#include "qlab/optq.hpp"

namespace qlab {

struct QronosInput {
  Matrix x;        // clean input
  Matrix x_tilde;  // drifted input, same shape
  Vector w;
  QuantConfig cfg;
  bool ls_init = false;
};

class QronosPlan {
 public:
  QronosPlan(const MatrixRef& x, const MatrixRef& x_tilde, const QuantConfig& cfg,
             bool ls_init = false)
      : cfg_(cfg), ls_init_(ls_init) {
    require(x.rows() == x_tilde.rows() && x.cols() == x_tilde.cols(),
            ErrorCode::kDimensionMismatch, "X and X_tilde must have identical shapes");
    require(x.rows() > 0 && x.cols() > 0, ErrorCode::kDimensionMismatch,
            "calibration matrices must be non-empty");
    lambda_ = cfg.lambda.resolve(x_tilde);
    if (cfg.order == ColumnOrder::kDescendingNorm) {
      perm_ = reorder_descending(x_tilde).permutation;
    } else {
      perm_ = identity_permutation(x.cols());
    }
    xp_ = permute_columns(x, perm_);
    xtp_ = permute_columns(x_tilde, perm_);
    xe_ = lambda_ > 0.0 ? augment(xp_, lambda_) : xp_;
    xte_ = lambda_ > 0.0 ? augment(xtp_, lambda_) : xtp_;

    if (cfg.formulation == Formulation::kCholesky) {
      rule_ = detail::cholesky_rule(cholesky_inverse_hessian(xtp_, lambda_));
    } else {
      rule_ = detail::least_squares_rule(xte_);
    }
    const Index n = x.cols();
    refit_ = ls_init_ ? pseudo_inverse(xte_) : pseudo_inverse(xte_.rightCols(n - 1));
  }

  double lambda() const { return lambda_; }
  bool ls_init() const { return ls_init_; }
  const std::vector<Index>& permutation() const { return perm_; }
  /// Effective (permuted, augmented when lambda > 0) clean and drifted matrices.
  const Matrix& effective_x() const { return xe_; }
  const Matrix& effective_x_tilde() const { return xte_; }

  QuantResult quantize(const MatrixRef& w, std::size_t threads = 1) const {
    return quantize(w, cfg_.rounding, threads);
  }

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
      const Vector w0 = wp.col(col);
      const Vector y = xe_ * w0;
      const Vector clean_target = xp_ * w0;
      Vector state;
      if (ls_init_) {
        state = refit_ * y;
        detail::run_steps(rule_, 0, state, cfg_.alphabet, rounding, rng, clean_target, xtp_,
                          trace);
      } else {
        state = w0;
        const auto first = xte_.col(0);
        const double first_sq = first.squaredNorm();
        double pre = w0(0);
        if (first_sq > 0.0) {
          pre = first.dot(y - xte_.rightCols(n - 1) * w0.tail(n - 1)) / first_sq;
        } else {
          trace.first_step_fallback = true;
        }
        const double q1 = detail::quantize_coordinate(0, pre, state, cfg_.alphabet, rounding,
                                                      rng, trace);
        if (n > 1) state.tail(n - 1) = refit_ * (y - q1 * first);
        trace.error_norms(0) = (clean_target - xtp_ * state).norm();
        detail::run_steps(rule_, 1, state, cfg_.alphabet, rounding, rng, clean_target, xtp_,
                          trace);
      }
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
  bool ls_init_;
  double lambda_ = 0.0;
  std::vector<Index> perm_;
  Matrix xp_, xtp_, xe_, xte_;
  detail::UpdateRule rule_;
  Matrix refit_;
};

inline QuantResult qronos_column(const QronosInput& input) {
  require(input.w.size() == input.x.cols(), ErrorCode::kDimensionMismatch,
          "weight vector length does not match the number of columns of X");
  return QronosPlan(input.x, input.x_tilde, input.cfg, input.ls_init).quantize(Matrix(input.w));
}

inline QuantResult qronos_layer(const MatrixRef& x, const MatrixRef& x_tilde,
                                const MatrixRef& w, const QuantConfig& cfg,
                                bool ls_init = false, std::size_t threads = 1) {
  return QronosPlan(x, x_tilde, cfg, ls_init).quantize(w, threads);
}

/**
 * The error that does not depend on rounding:
 *   P_{Xt_{>1}^perp} P_{Xt_1^perp} (X w - Xt w)   (standard)
 *   P_{Xt^perp} (X w - Xt w)                      (ls_init)
 * Arguments are the effective matrices in processing order.
 */
inline Vector qronos_leading_term(const MatrixRef& xe, const MatrixRef& xte,
                                  const VectorRef& w, bool ls_init) {
  const Vector drift = xe * w - xte * w;
  if (ls_init) return project_residual(xte, drift);
  const Index n = xte.cols();
  return project_residual(xte.rightCols(n - 1), project_residual(xte.leftCols(1), drift));
}

struct QronosDecomposition {
  Vector error;    // X w - Xt q
  Vector leading;  // rounding-independent part
  std::vector<Vector> terms;

  Vector sum() const {
    Vector s = leading;
    for (const auto& t : terms) s += t;
    return s;
  }
};

inline QronosDecomposition qronos_error_decomposition(const QronosInput& input,
                                                      const QuantResult& result,
                                                      Index column = 0) {
  require(column >= 0 && static_cast<std::size_t>(column) < result.traces.size(),
          ErrorCode::kTraceMissing, "no trace recorded for column " + std::to_string(column));
  const QuantTrace& trace = result.traces[static_cast<std::size_t>(column)];
  const Index n = input.x.cols();
  require(input.x_tilde.rows() == input.x.rows() && input.x_tilde.cols() == n &&
              input.w.size() == n && result.q.rows() == n,
          ErrorCode::kDimensionMismatch, "inputs and result disagree on shapes");
  require(trace.size() == n && result.permutation.size() == static_cast<std::size_t>(n),
          ErrorCode::kTraceMissing, "trace length does not match N");

  const Matrix xp = permute_columns(input.x, result.permutation);
  const Matrix xtp = permute_columns(input.x_tilde, result.permutation);
  const Matrix xe = result.lambda > 0.0 ? augment(xp, result.lambda) : xp;
  const Matrix xte = result.lambda > 0.0 ? augment(xtp, result.lambda) : xtp;
  const Vector wp = permute_rows(Matrix(input.w), result.permutation).col(0);
  const Vector qp = permute_rows(result.q.col(column), result.permutation).col(0);

  QronosDecomposition out;
  out.error = xe * wp - xte * qp;
  out.leading = qronos_leading_term(xe, xte, wp, input.ls_init);
  out.terms.reserve(static_cast<std::size_t>(n));
  for (Index j = 0; j < n; ++j)
    out.terms.push_back(trace.residue(j) *
                        project_residual(xte.rightCols(n - j - 1), xte.col(j)));
  return out;
}

}  // namespace qlab
