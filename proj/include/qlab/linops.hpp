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
 * Dense linear-algebra kernels shared by the quantizers and the bound
 * evaluators.
 *
 * Wherever a pseudo-inverse or a "nonzero singular value" appears, a singular
 * value s of an r x c matrix A counts as zero when
 *
 *   s <= max(r, c) * sigma_max(A) * 1e-12.
 *
 * Indices are 0-based; the trailing block of column j is columns j+1..N-1.
 */

#include <algorithm>
#include <cmath>
#include <string>

#include "qlab/common.hpp"

namespace qlab {

inline constexpr double kRankToleranceFactor = 1e-12;

/// m x N calibration data with validated entries and cached column norms.
class CalibrationMatrix {
 public:
  explicit CalibrationMatrix(Matrix x) : x_(std::move(x)) {
    require(x_.rows() > 0 && x_.cols() > 0, ErrorCode::kDimensionMismatch,
            "calibration matrix must be non-empty");
    require(x_.allFinite(), ErrorCode::kNonFiniteEntry,
            "calibration matrix has non-finite entries");
    norms_ = x_.colwise().norm().transpose();
  }

  Index rows() const { return x_.rows(); }
  Index cols() const { return x_.cols(); }
  const Matrix& matrix() const { return x_; }
  const Vector& column_norms() const { return norms_; }

 private:
  Matrix x_;
  Vector norms_;
};

inline double rank_tolerance(Index rows, Index cols, double sigma_max) {
  return static_cast<double>(std::max(rows, cols)) * sigma_max * kRankToleranceFactor;
}

namespace detail {

struct ThinSvd {
  Matrix u;
  Vector s;
  Matrix v;
  double tol = 0.0;
  Index rank = 0;
};

inline ThinSvd thin_svd(const MatrixRef& a, bool want_u, bool want_v) {
  ThinSvd out;
  if (a.rows() == 0 || a.cols() == 0) return out;
  unsigned options = 0;
  if (want_u) options |= Eigen::ComputeThinU;
  if (want_v) options |= Eigen::ComputeThinV;
  Eigen::BDCSVD<Matrix> svd(a, options);
  out.s = svd.singularValues();
  if (want_u) out.u = svd.matrixU();
  if (want_v) out.v = svd.matrixV();
  const double smax = out.s.size() > 0 ? out.s(0) : 0.0;
  out.tol = rank_tolerance(a.rows(), a.cols(), smax);
  out.rank = 0;
  for (Index i = 0; i < out.s.size(); ++i)
    if (out.s(i) > out.tol) ++out.rank;
  return out;
}

}  // namespace detail

/// Singular values in decreasing order.
inline Vector singular_values(const MatrixRef& a) {
  return detail::thin_svd(a, false, false).s;
}

inline Index numerical_rank(const MatrixRef& a) { return detail::thin_svd(a, false, false).rank; }

/// Smallest singular value above the rank tolerance; 0 for a zero (or empty) matrix.
inline double smallest_nonzero_singular_value(const MatrixRef& a) {
  const auto svd = detail::thin_svd(a, false, false);
  return svd.rank > 0 ? svd.s(svd.rank - 1) : 0.0;
}

/// The stacked matrix [X; sqrt(lambda) I], so that Xa^T Xa = X^T X + lambda I.
inline Matrix augment(const MatrixRef& x, double lambda) {
  require(lambda > 0.0 && std::isfinite(lambda), ErrorCode::kInvalidLambda,
          "augmentation needs lambda > 0");
  const Index m = x.rows();
  const Index n = x.cols();
  Matrix out = Matrix::Zero(m + n, n);
  out.topRows(m) = x;
  out.bottomRows(n).diagonal().setConstant(std::sqrt(lambda));
  return out;
}

/// Lower-triangular L with L L^T = (X^T X + lambda I)^{-1}.
struct CholeskyFactor {
  Matrix lower;
  double lambda = 0.0;
};

inline CholeskyFactor cholesky_inverse_hessian(const MatrixRef& x, double lambda) {
  require(lambda >= 0.0 && std::isfinite(lambda), ErrorCode::kInvalidLambda,
          "lambda must be nonnegative and finite");
  const Index n = x.cols();
  Matrix h = x.transpose() * x;
  h.diagonal().array() += lambda;

  const std::string hint =
      " (lambda = " + std::to_string(lambda) +
      "; try a larger dampening such as the default 0.01 * ||X||_F^2 / N)";
  const double pivot_floor =
      static_cast<double>(std::max<Index>(n, 1)) * Eigen::NumTraits<double>::epsilon() *
      std::max(h.diagonal().maxCoeff(), 0.0);

  Eigen::LLT<Matrix> llt(h);
  require(llt.info() == Eigen::Success, ErrorCode::kNotPositiveDefinite,
          "X^T X + lambda I is not positive definite" + hint);
  {
    const Vector d = Matrix(llt.matrixL()).diagonal();
    require(d.cwiseAbs2().minCoeff() > pivot_floor, ErrorCode::kNotPositiveDefinite,
            "X^T X + lambda I is numerically singular" + hint);
  }

  Matrix h_inv = llt.solve(Matrix::Identity(n, n));
  h_inv = 0.5 * (h_inv + h_inv.transpose()).eval();
  Eigen::LLT<Matrix> inv_llt(h_inv);
  require(inv_llt.info() == Eigen::Success, ErrorCode::kNotPositiveDefinite,
          "inverse Hessian factorization failed" + hint);

  CholeskyFactor out{Matrix(inv_llt.matrixL()), lambda};
  for (Index t = 0; t < n; ++t) {
    require(out.lower(t, t) >= 1e-300, ErrorCode::kNotPositiveDefinite,
            "Cholesky diagonal underflow at column " + std::to_string(t) + hint);
  }
  return out;
}

/// v minus its orthogonal projection onto col(tail); v itself when tail is empty.
inline Vector project_residual(const MatrixRef& tail, const VectorRef& v) {
  require(tail.cols() == 0 || tail.rows() == v.size(), ErrorCode::kDimensionMismatch,
          "projection block and vector have different row counts");
  if (tail.cols() == 0) return v;
  const auto svd = detail::thin_svd(tail, true, false);
  if (svd.rank == 0) return v;
  const auto basis = svd.u.leftCols(svd.rank);
  return v - basis * (basis.transpose() * v);
}

/// Minimal-norm minimizer of ||A v - b||_2.
inline Vector ls_solve_minnorm(const MatrixRef& a, const VectorRef& b) {
  require(a.rows() == b.size(), ErrorCode::kDimensionMismatch,
          "least-squares operator and right-hand side have different row counts");
  if (a.cols() == 0) return Vector(0);
  const auto svd = detail::thin_svd(a, true, true);
  Vector out = Vector::Zero(a.cols());
  if (svd.rank == 0) return out;
  const Index r = svd.rank;
  const Vector coeffs =
      (svd.u.leftCols(r).transpose() * b).cwiseQuotient(svd.s.head(r));
  out = svd.v.leftCols(r) * coeffs;
  return out;
}

/// Moore-Penrose pseudo-inverse with the shared rank tolerance.
inline Matrix pseudo_inverse(const MatrixRef& a) {
  if (a.cols() == 0 || a.rows() == 0) return Matrix::Zero(a.cols(), a.rows());
  const auto svd = detail::thin_svd(a, true, true);
  const Index r = svd.rank;
  if (r == 0) return Matrix::Zero(a.cols(), a.rows());
  return svd.v.leftCols(r) * svd.s.head(r).cwiseInverse().asDiagonal() *
         svd.u.leftCols(r).transpose();
}

/**
 * Entry j (0-based) is the smallest nonzero singular value of columns
 * j+1..N-1, or 0 when that block is empty or all-zero. The last entry is
 * always 0.
 */
inline Vector sigma_min_sequence(const MatrixRef& x) {
  const Index n = x.cols();
  Vector out = Vector::Zero(n);
  for (Index j = 0; j + 1 < n; ++j)
    out(j) = smallest_nonzero_singular_value(x.rightCols(n - j - 1));
  return out;
}

/// Entry j is ||P_{X_{>j}^perp} X_j||_2; the last entry is ||X_N||_2.
inline Vector projection_residual_norms(const MatrixRef& x) {
  const Index n = x.cols();
  Vector out(n);
  for (Index j = 0; j < n; ++j)
    out(j) = project_residual(x.rightCols(n - j - 1), x.col(j)).norm();
  return out;
}

}  // namespace qlab
