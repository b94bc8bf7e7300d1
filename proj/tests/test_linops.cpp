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
#include <gtest/gtest.h>

#include <functional>
#include <stdexcept>

#include "qlab/linops.hpp"
#include "qlab/optq.hpp"
#include "qlab/parallel.hpp"
#include "qlab/rng.hpp"
#include "test_support.hpp"

namespace qlab {
namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no qlab::Error thrown";
  return ErrorCode::kInvalidArgument;
}

TEST(Linops, CalibrationMatrixValidates) {
  Matrix x = gaussian_matrix(4, 3, 1);
  CalibrationMatrix cm(x);
  EXPECT_NEAR(cm.column_norms()(1), x.col(1).norm(), 1e-15);
  x(2, 2) = std::nan("");
  EXPECT_EQ(code_of([&] { CalibrationMatrix bad(x); }), ErrorCode::kNonFiniteEntry);
  EXPECT_EQ(code_of([] { CalibrationMatrix bad(Matrix(0, 3)); }), ErrorCode::kDimensionMismatch);
}

TEST(Linops, AugmentationReproducesDampedGram) {
  const Matrix x = gaussian_matrix(5, 7, 2);
  const Matrix xa = augment(x, 0.3);
  Matrix h = x.transpose() * x;
  h.diagonal().array() += 0.3;
  EXPECT_LT((xa.transpose() * xa - h).norm(), 1e-12);
  EXPECT_EQ(code_of([&] { augment(x, 0.0); }), ErrorCode::kInvalidLambda);
}

TEST(Linops, CholeskyFactorInvertsHessian) {
  const Matrix x = gaussian_matrix(12, 8, 3);
  const auto f = cholesky_inverse_hessian(x, 0.1);
  Matrix h = x.transpose() * x;
  h.diagonal().array() += 0.1;
  const Matrix l = f.lower;
  EXPECT_LT((l * l.transpose() * h - Matrix::Identity(8, 8)).norm(), 1e-10);
  EXPECT_LT(l.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().norm(), 1e-300);
}

TEST(Linops, CholeskyRejectsSingularHessian) {
  const Matrix x = gaussian_matrix(3, 6, 4);  // rank 3 < 6
  EXPECT_EQ(code_of([&] { cholesky_inverse_hessian(x, 0.0); }), ErrorCode::kNotPositiveDefinite);
  EXPECT_EQ(code_of([&] { cholesky_inverse_hessian(x, -1.0); }), ErrorCode::kInvalidLambda);
  EXPECT_NO_THROW(cholesky_inverse_hessian(x, 0.5));
}

TEST(Linops, ProjectionMatchesOrthogonalDecomposition) {
  const Matrix x = gaussian_matrix(9, 4, 5);
  const Vector v = gaussian_matrix(9, 1, 6).col(0);
  const Vector r = project_residual(x, v);
  EXPECT_LT((r - testing::cod_project_out(x, v)).norm(), 1e-12);
  EXPECT_LT((x.transpose() * r).norm(), 1e-12);
  EXPECT_EQ(project_residual(Matrix(9, 0), v), v);
}

TEST(Linops, MinNormSolveOnRankDeficientSystem) {
  Matrix a = gaussian_matrix(6, 3, 7);
  a.col(2) = a.col(0) + 2.0 * a.col(1);
  const Vector b = gaussian_matrix(6, 1, 8).col(0);
  const Vector v = ls_solve_minnorm(a, b);
  EXPECT_LT((v - testing::cod_solve(a, b)).norm(), 1e-10);
  EXPECT_LT((pseudo_inverse(a) * b - v).norm(), 1e-10);
  EXPECT_EQ(numerical_rank(a), 2);
}

TEST(Linops, SigmaMinSequenceUsesTrailingBlocks) {
  const Matrix x = gaussian_matrix(4, 10, 9);
  const Vector s = sigma_min_sequence(x);
  ASSERT_EQ(s.size(), 10);
  EXPECT_EQ(s(9), 0.0);
  for (Index j = 0; j + 1 < 10; ++j)
    EXPECT_NEAR(s(j), testing::smallest_singular_by_gram(x.rightCols(10 - j - 1)), 1e-8) << j;
  EXPECT_NEAR(smallest_nonzero_singular_value(Matrix::Zero(3, 3)), 0.0, 0.0);
}

TEST(Linops, ProjectionResidualNormsEndWithLastColumnNorm) {
  const Matrix x = gaussian_matrix(6, 5, 10);
  const Vector p = projection_residual_norms(x);
  EXPECT_NEAR(p(4), x.col(4).norm(), 1e-14);
  for (Index j = 0; j < 4; ++j)
    EXPECT_NEAR(p(j), testing::cod_project_out(x.rightCols(4 - j), x.col(j)).norm(), 1e-10);
}

// Cholesky gains L_{>t,t} / L_tt against least-squares gains -pinv(Xa_{>t}) Xa_t.
TEST(Linops, CholeskyGainsEqualLeastSquaresGains) {
  for (double lambda : {0.0, 0.05, 2.0}) {
    const Matrix x = gaussian_matrix(20, 9, 11);
    const auto chol = detail::cholesky_rule(cholesky_inverse_hessian(x, lambda));
    const auto ls = detail::least_squares_rule(lambda > 0 ? augment(x, lambda) : x);
    for (std::size_t t = 0; t < 9; ++t) {
      const Matrix xa = lambda > 0 ? augment(x, lambda) : x;
      const Index n = 9, ti = static_cast<Index>(t);
      const Vector ref = -testing::cod_solve(xa.rightCols(n - ti - 1), xa.col(ti));
      EXPECT_LT((chol.gains[t] - ref).norm(), 1e-9) << "lambda " << lambda << " t " << t;
      EXPECT_LT((ls.gains[t] - ref).norm(), 1e-9) << "lambda " << lambda << " t " << t;
    }
  }
}

TEST(Parallel, RunsEveryIndexOnce) {
  std::vector<int> hits(100, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
}

TEST(Parallel, PropagatesFirstException) {
  EXPECT_THROW(parallel_for(50, 3,
                            [](std::size_t i) {
                              if (i == 17) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}

}  // namespace
}  // namespace qlab
