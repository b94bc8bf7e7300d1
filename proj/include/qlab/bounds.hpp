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
 * Closed-form error bounds for OPTQ / Qronos and checks of realized errors
 * against them.
 *
 * All matrices are taken in processing order (after any column reordering).
 * With Xa = [X; sqrt(lambda) I] and s_j the smallest singular value of the
 * trailing block X_{>j} (0-based j):
 *
 *   b_j = lambda ||X_j||^2 / (s_j^2 + lambda) + lambda   if X_{>j} has >= m columns
 *   b_j = ||X_j||^2 + lambda                            otherwise
 *
 * b_j bounds ||P_{Xa_{>j}^perp} Xa_j||^2, and
 *
 *   Cinf^2 = max_j b_j,   C2^2 = min{ max_j b_j - lambda, ||X||_F^2 / N } + lambda.
 *
 * The stochastic bounds hold with radius delta * sqrt(2 pi (p log N + p' log N'))
 * times the relevant constant, except on an event of probability at most
 * sqrt(2) * rows / (N^p N'^(p'-1)).
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include "qlab/common.hpp"
#include "qlab/linops.hpp"
#include "qlab/optq.hpp"
#include "qlab/parallel.hpp"
#include "qlab/qronos.hpp"
#include "qlab/rng.hpp"

namespace qlab {

/// Relative slack granted to every "realized <= bound" comparison for floating-point roundoff.
inline constexpr double kRoundoffAllowance = 1e-12;

inline bool within_bound(double realized, double bound, double scale = 0.0) {
  return realized <= bound + kRoundoffAllowance * (std::abs(bound) + scale);
}

/// b_j as in the header comment; entry-wise upper bounds on the squared projection norms.
inline Vector projection_upper_bounds(const MatrixRef& x, double lambda) {
  require(lambda >= 0.0 && std::isfinite(lambda), ErrorCode::kInvalidLambda,
          "lambda must be nonnegative and finite");
  const Index m = x.rows();
  const Index n = x.cols();
  Vector out(n);
  for (Index j = 0; j < n; ++j) {
    const double col_sq = x.col(j).squaredNorm();
    if (n - j - 1 >= m) {
      const Vector s = singular_values(x.rightCols(n - j - 1));
      const double smin = s(m - 1);
      out(j) = lambda * col_sq / (smin * smin + lambda) + lambda;
    } else {
      out(j) = col_sq + lambda;
    }
  }
  return out;
}

inline double compute_Cinf(const MatrixRef& x, double lambda) {
  require(lambda > 0.0 && std::isfinite(lambda), ErrorCode::kInvalidLambda,
          "Cinf needs lambda > 0");
  return std::sqrt(projection_upper_bounds(x, lambda).maxCoeff());
}

inline double compute_C2(const MatrixRef& x, double lambda) {
  require(lambda > 0.0 && std::isfinite(lambda), ErrorCode::kInvalidLambda,
          "C2 needs lambda > 0");
  const double head = projection_upper_bounds(x, lambda).maxCoeff() - lambda;
  const double frob = x.squaredNorm() / static_cast<double>(x.cols());
  return std::sqrt(std::min(head, frob) + lambda);
}

/// max_{j >= N-k} ||X_j||^2 over the last k columns (k clipped to [0, N]).
inline double max_tail_column_norm_sq(const MatrixRef& x, Index k) {
  k = std::clamp<Index>(k, 0, x.cols());
  if (k == 0) return 0.0;
  return x.rightCols(k).colwise().squaredNorm().maxCoeff();
}

inline double linf_radius(double delta, double p, double pprime, Index n, Index n_layer) {
  const double expo = p * std::log(static_cast<double>(n)) +
                      pprime * std::log(static_cast<double>(std::max<Index>(n_layer, 1)));
  return delta * std::sqrt(2.0 * std::numbers::pi * std::max(expo, 0.0));
}

/// sqrt(2) * rows / (N^p N'^(p'-1)), clipped to [0, 1].
inline double failure_probability(double rows, Index n, Index n_layer, double p, double pprime) {
  const double log_denom = p * std::log(static_cast<double>(n)) +
                           (pprime - 1.0) * std::log(static_cast<double>(std::max<Index>(n_layer, 1)));
  const double value = std::sqrt(2.0) * rows * std::exp(-log_denom);
  return std::clamp(value, 0.0, 1.0);
}

/// p such that sqrt(2) * rows / (N^p N'^(p'-1)) = eps.
inline double solve_p_for_target(double eps, double rows, Index n, Index n_layer,
                                 double pprime = 2.0) {
  require(eps > 0.0 && eps < 1.0, ErrorCode::kInvalidArgument, "target must lie in (0, 1)");
  require(n > 1, ErrorCode::kInvalidArgument, "solving for p needs N > 1");
  const double lhs = std::log(std::sqrt(2.0) * rows / eps) -
                     (pprime - 1.0) * std::log(static_cast<double>(std::max<Index>(n_layer, 1)));
  return lhs / std::log(static_cast<double>(n));
}

struct BoundReport {
  double lambda = 0.0;
  double delta = 1.0;
  double c2 = 0.0;    // lambda = 0: min{max_j ||P X_j||, sqrt(||X||_F^2 / N)}
  double cinf = 0.0;  // lambda = 0: max_j ||P X_j||
  Vector proj_norms;  // ||P_{Xa_{>j}^perp} Xa_j||, augmented when lambda > 0
  Vector sigma_mins;  // smallest nonzero singular value of X_{>j}
  double l2_bound_xwq = 0.0;
  double l2_bound_wq = 0.0;  // +inf when lambda = 0
  double linf_bound_xwq = 0.0;
  double linf_bound_wq = 0.0;  // +inf when lambda = 0
  double p = 2.0;
  double pprime = 2.0;
  Index layer_cols = 1;
  double failure_prob = 1.0;
};

inline BoundReport bound_report(const MatrixRef& x, double lambda, double delta,
                                Index layer_cols = 1, double p = 2.0, double pprime = 2.0) {
  require(lambda >= 0.0 && std::isfinite(lambda), ErrorCode::kInvalidLambda,
          "lambda must be nonnegative and finite");
  require(delta > 0.0 && std::isfinite(delta), ErrorCode::kInvalidArgument,
          "delta must be positive");
  require(p > 0.0 && pprime > 0.0, ErrorCode::kInvalidArgument, "p and p' must be positive");
  const Index m = x.rows();
  const Index n = x.cols();
  BoundReport r;
  r.lambda = lambda;
  r.delta = delta;
  r.p = p;
  r.pprime = pprime;
  r.layer_cols = std::max<Index>(layer_cols, 1);
  r.sigma_mins = sigma_min_sequence(x);
  r.proj_norms = projection_residual_norms(lambda > 0.0 ? augment(x, lambda) : Matrix(x));
  const double half_sqrt_n = 0.5 * delta * std::sqrt(static_cast<double>(n));
  const double radius = linf_radius(delta, p, pprime, n, r.layer_cols);
  double rows = static_cast<double>(m);
  if (lambda > 0.0) {
    r.c2 = compute_C2(x, lambda);
    r.cinf = compute_Cinf(x, lambda);
    r.l2_bound_wq = half_sqrt_n * r.c2 / std::sqrt(lambda);
    r.linf_bound_wq = radius * r.cinf / std::sqrt(lambda);
    rows += static_cast<double>(n);
  } else {
    const double pmax = r.proj_norms.maxCoeff();
    r.c2 = std::min(pmax, std::sqrt(x.squaredNorm() / static_cast<double>(n)));
    r.cinf = pmax;
    r.l2_bound_wq = std::numeric_limits<double>::infinity();
    r.linf_bound_wq = std::numeric_limits<double>::infinity();
  }
  r.l2_bound_xwq = half_sqrt_n * r.c2;
  r.linf_bound_xwq = radius * r.cinf;
  r.failure_prob = failure_probability(rows, n, r.layer_cols, p, pprime);
  return r;
}

struct BoundCheck {
  const char* name = "";
  double realized = 0.0;
  double bound = 0.0;
  double slack = 0.0;  // bound - realized
  bool holds = true;
};

struct L2Verdict {
  std::vector<BoundCheck> checks;

  bool holds() const {
    return std::all_of(checks.begin(), checks.end(), [](const BoundCheck& c) { return c.holds; });
  }
  double min_slack() const {
    double s = std::numeric_limits<double>::infinity();
    for (const auto& c : checks) s = std::min(s, c.slack);
    return s;
  }
};

namespace detail {

inline BoundCheck make_check(const char* name, double realized, double bound, double scale) {
  return {name, realized, bound, bound - realized, within_bound(realized, bound, scale)};
}

}  // namespace detail

/**
 * Deterministic l2 guarantees for an infinite grid of step delta, with x, w, q
 * in processing order. For lambda > 0 this checks the combined bound
 * ||Xw - Xq||^2 + lambda ||w - q||^2 <= delta^2 N C2^2 / 4, its two
 * consequences, and the two simplified bounds. For lambda = 0 it checks
 * ||Xw - Xq|| <= (delta/2) sqrt(N) min{max_j ||P X_j||, sqrt(||X||_F^2 / N)}.
 */
inline L2Verdict check_l2_theorem(const MatrixRef& x, const VectorRef& w, const VectorRef& q,
                                  double lambda, double delta) {
  require(w.size() == x.cols() && q.size() == x.cols(), ErrorCode::kDimensionMismatch,
          "w and q must have N entries");
  const Index n = x.cols();
  const double nn = static_cast<double>(n);
  const Vector d = w - q;
  const double xe = (x * d).norm();
  const double we = d.norm();
  const double scale = x.norm() * std::max(w.norm(), q.norm());
  const double half_sqrt_n = 0.5 * delta * std::sqrt(nn);
  L2Verdict v;
  if (lambda > 0.0) {
    const double c2 = compute_C2(x, lambda);
    const double combined = xe * xe + lambda * we * we;
    v.checks.push_back(detail::make_check("combined_sq", combined,
                                          0.25 * delta * delta * nn * c2 * c2, scale * scale));
    v.checks.push_back(detail::make_check("xwq_l2", xe, half_sqrt_n * c2, scale));
    v.checks.push_back(detail::make_check("wq_l2", we, half_sqrt_n * c2 / std::sqrt(lambda),
                                          w.norm() + q.norm()));
    const double trace_term = std::sqrt(x.squaredNorm() / nn + lambda);
    const double op = singular_values(x)(0);
    v.checks.push_back(
        detail::make_check("xwq_l2_simplified", xe, half_sqrt_n * std::min(trace_term, op), scale));
    v.checks.push_back(detail::make_check(
        "wq_l2_simplified", we, half_sqrt_n * std::sqrt(x.squaredNorm() / (nn * lambda) + 1.0),
        w.norm() + q.norm()));
  } else {
    const double pmax = projection_residual_norms(x).maxCoeff();
    const double c = std::min(pmax, std::sqrt(x.squaredNorm() / nn));
    v.checks.push_back(detail::make_check("xwq_l2", xe, half_sqrt_n * c, scale));
  }
  return v;
}

/// Same checks for one column of an OPTQ result, mapped into processing order.
inline L2Verdict check_l2_theorem(const MatrixRef& x, const VectorRef& w,
                                  const QuantResult& result, double delta, Index column = 0) {
  const Matrix xp = permute_columns(x, result.permutation);
  const Vector wp = permute_rows(Matrix(w), result.permutation).col(0);
  const Vector qp = permute_rows(result.q.col(column), result.permutation).col(0);
  return check_l2_theorem(xp, wp, qp, result.lambda, delta);
}

struct MonteCarloVerdict {
  Index trials = 0;
  Index failures = 0;
  double rate = 0.0;
  double predicted = 1.0;   // theoretical failure probability, clipped to [0, 1]
  double allowance = 0.0;   // 3 binomial standard errors at `predicted`
  double bound = 0.0;       // radius applied to the X-side error
  double bound_w = std::numeric_limits<double>::infinity();
  double max_ratio = 0.0;   // largest realized / bound over all trials
  double max_early_residual = 0.0;  // low-rank check only
  bool vacuous = false;
  bool pass = false;
};

struct MonteCarloOptions {
  Index trials = 1000;
  std::uint64_t seed = 0;
  double p = 2.0;
  double pprime = 2.0;
  std::size_t threads = 1;
};

namespace detail {

inline void finish_verdict(MonteCarloVerdict& v) {
  v.rate = v.trials > 0 ? static_cast<double>(v.failures) / static_cast<double>(v.trials) : 0.0;
  v.vacuous = v.predicted >= 1.0;
  const double pi = v.predicted;
  v.allowance = v.trials > 0 ? 3.0 * std::sqrt(pi * (1.0 - pi) / static_cast<double>(v.trials)) : 0.0;
  v.pass = v.vacuous || v.rate <= v.predicted + v.allowance;
}

struct TrialOutcome {
  bool failed = false;
  double ratio = 0.0;
  double early = 0.0;
};

inline void tally(MonteCarloVerdict& v, const std::vector<TrialOutcome>& outcomes) {
  for (const auto& o : outcomes) {
    if (o.failed) ++v.failures;
    v.max_ratio = std::max(v.max_ratio, o.ratio);
    v.max_early_residual = std::max(v.max_early_residual, o.early);
  }
}

}  // namespace detail

/**
 * Monte Carlo check of the stochastic l_inf bounds for OPTQ on the N x N'
 * weight matrix W. `cfg.rounding` is overridden by stochastic rounding with
 * seed derive_seed(opts.seed, trial). With lambda > 0 a trial fails when
 * either max|XW - XQ| > radius * Cinf or max|W - Q| > radius * Cinf / sqrt(lambda);
 * with lambda = 0 (X of full column rank) only the first event applies and the
 * constant is max_j ||P_{X_{>j}^perp} X_j||.
 */
inline MonteCarloVerdict check_linf_theorem_mc(const MatrixRef& x, const MatrixRef& w,
                                               const QuantConfig& cfg,
                                               const MonteCarloOptions& opts) {
  require(opts.trials >= 1, ErrorCode::kInvalidArgument, "need at least one trial");
  require(!cfg.alphabet.is_finite(), ErrorCode::kInvalidArgument,
          "the stochastic bounds are stated for the infinite grid");
  const OptqPlan plan(x, cfg);
  const double lambda = plan.lambda();
  const Matrix& xp = plan.permuted_x();
  const Index m = x.rows();
  const Index n = x.cols();
  if (lambda == 0.0) {
    require(numerical_rank(xp) == n, ErrorCode::kRankMismatch,
            "the lambda = 0 bound needs X of full column rank");
  }
  const BoundReport report = bound_report(xp, lambda, cfg.alphabet.step(), w.cols(), opts.p,
                                          opts.pprime);
  MonteCarloVerdict v;
  v.trials = opts.trials;
  v.bound = report.linf_bound_xwq;
  v.bound_w = report.linf_bound_wq;
  v.predicted = failure_probability(static_cast<double>(lambda > 0.0 ? m + n : m), n, w.cols(),
                                    opts.p, opts.pprime);

  const Matrix xw = x * w;
  std::vector<detail::TrialOutcome> outcomes(static_cast<std::size_t>(opts.trials));
  parallel_for(outcomes.size(), opts.threads, [&](std::size_t t) {
    const auto result =
        plan.quantize(w, RoundingMode::stochastic(derive_seed(opts.seed, t)), 1);
    const double ex = (xw - x * result.q).cwiseAbs().maxCoeff();
    double ratio = ex / v.bound;
    bool failed = !within_bound(ex, v.bound);
    if (lambda > 0.0) {
      const double ew = (w - result.q).cwiseAbs().maxCoeff();
      ratio = std::max(ratio, ew / v.bound_w);
      failed = failed || !within_bound(ew, v.bound_w);
    }
    outcomes[t] = {failed, ratio, 0.0};
  });
  detail::tally(v, outcomes);
  detail::finish_verdict(v);
  return v;
}

/**
 * Monte Carlo check for X of rank r < N run through the least-squares form
 * with lambda = 0: entrywise |XW - XQ| <= radius * max_{j >= N-r} ||X_j||,
 * failure probability sqrt(2) r / (N^p N'^(p'-1)). Also records the largest
 * residual ||Xw - X w^{(N-r)}|| / ||Xw|| after step N-r, which vanishes when
 * the trailing blocks stay in general position.
 */
inline MonteCarloVerdict check_lowrank_corollary(const MatrixRef& x, const MatrixRef& w,
                                                 Index rank, double delta,
                                                 const MonteCarloOptions& opts,
                                                 ColumnOrder order = ColumnOrder::kNone) {
  require(opts.trials >= 1, ErrorCode::kInvalidArgument, "need at least one trial");
  const Index n = x.cols();
  const Index detected = numerical_rank(x);
  require(detected == rank && rank >= 1 && rank <= n, ErrorCode::kRankMismatch,
          "expected rank " + std::to_string(rank) + ", detected " + std::to_string(detected));
  QuantConfig cfg;
  cfg.lambda = Dampening::fixed(0.0);
  cfg.order = order;
  cfg.formulation = Formulation::kLeastSquares;
  cfg.alphabet = Alphabet::infinite(delta);
  const OptqPlan plan(x, cfg);
  const Matrix& xp = plan.permuted_x();

  MonteCarloVerdict v;
  v.trials = opts.trials;
  v.bound = linf_radius(delta, opts.p, opts.pprime, n, w.cols()) *
            std::sqrt(max_tail_column_norm_sq(xp, rank));
  v.predicted =
      failure_probability(static_cast<double>(rank), n, w.cols(), opts.p, opts.pprime);

  const Matrix xw = x * w;
  std::vector<detail::TrialOutcome> outcomes(static_cast<std::size_t>(opts.trials));
  parallel_for(outcomes.size(), opts.threads, [&](std::size_t t) {
    const auto result =
        plan.quantize(w, RoundingMode::stochastic(derive_seed(opts.seed, t)), 1);
    const double ex = (xw - x * result.q).cwiseAbs().maxCoeff();
    double early = 0.0;
    if (rank < n) {
      for (Index c = 0; c < w.cols(); ++c) {
        const double ref = std::max(xw.col(c).norm(), std::numeric_limits<double>::min());
        early = std::max(early,
                         result.traces[static_cast<std::size_t>(c)].error_norms(n - rank - 1) / ref);
      }
    }
    outcomes[t] = {!within_bound(ex, v.bound), ex / v.bound, early};
  });
  detail::tally(v, outcomes);
  detail::finish_verdict(v);
  return v;
}

/**
 * Monte Carlo check of the stochastic Qronos bound: entrywise
 * |Xw - Xt q| <= |leading term| + radius * max_j ||P_{Xt_{>j}^perp} Xt_j||,
 * failure probability sqrt(2) rows / (N^p N'^p'). Rows are m, or m + N on the
 * augmented pair when lambda > 0.
 */
inline MonteCarloVerdict check_qronos_linf_mc(const MatrixRef& x, const MatrixRef& x_tilde,
                                              const MatrixRef& w, const QuantConfig& cfg,
                                              bool ls_init, const MonteCarloOptions& opts) {
  require(opts.trials >= 1, ErrorCode::kInvalidArgument, "need at least one trial");
  require(!cfg.alphabet.is_finite(), ErrorCode::kInvalidArgument,
          "the stochastic bounds are stated for the infinite grid");
  const QronosPlan plan(x, x_tilde, cfg, ls_init);
  const Matrix& xe = plan.effective_x();
  const Matrix& xte = plan.effective_x_tilde();
  const Index n = x.cols();
  const Index rows = xe.rows();

  MonteCarloVerdict v;
  v.trials = opts.trials;
  v.bound = linf_radius(cfg.alphabet.step(), opts.p, opts.pprime, n, w.cols()) *
            projection_residual_norms(xte).maxCoeff();
  const double log_denom =
      opts.p * std::log(static_cast<double>(n)) +
      opts.pprime * std::log(static_cast<double>(std::max<Index>(w.cols(), 1)));
  v.predicted =
      std::clamp(std::sqrt(2.0) * static_cast<double>(rows) * std::exp(-log_denom), 0.0, 1.0);

  const Matrix wp = permute_rows(w, plan.permutation());
  Matrix lead_abs(rows, w.cols());
  for (Index c = 0; c < w.cols(); ++c)
    lead_abs.col(c) = qronos_leading_term(xe, xte, wp.col(c), ls_init).cwiseAbs();
  const Matrix target = xe * wp;

  std::vector<detail::TrialOutcome> outcomes(static_cast<std::size_t>(opts.trials));
  parallel_for(outcomes.size(), opts.threads, [&](std::size_t t) {
    const auto result =
        plan.quantize(w, RoundingMode::stochastic(derive_seed(opts.seed, t)), 1);
    const Matrix qp = permute_rows(result.q, plan.permutation());
    const Matrix excess = (target - xte * qp).cwiseAbs() - lead_abs;
    const double worst = excess.maxCoeff();
    outcomes[t] = {!within_bound(worst, v.bound, lead_abs.maxCoeff()), worst / v.bound, 0.0};
  });
  detail::tally(v, outcomes);
  detail::finish_verdict(v);
  return v;
}

/// Deterministic Qronos l2 bound: ||Xw - Xt q|| <= ||lead|| + (delta/2) sqrt(N) min{max_j ||P Xt_j||, sqrt(Tr(Xt^T Xt)/N)}.
inline BoundCheck check_qronos_l2(const QronosInput& input, const QuantResult& result,
                                  double delta, Index column = 0) {
  const auto dec = qronos_error_decomposition(input, result, column);
  const Matrix xtp = permute_columns(input.x_tilde, result.permutation);
  const Matrix xte = result.lambda > 0.0 ? augment(xtp, result.lambda) : xtp;
  const double n = static_cast<double>(xte.cols());
  const double c = std::min(projection_residual_norms(xte).maxCoeff(),
                            std::sqrt(xte.squaredNorm() / n));
  const double bound = dec.leading.norm() + 0.5 * delta * std::sqrt(n) * c;
  return detail::make_check("qronos_l2", dec.error.norm(), bound, dec.leading.norm());
}

struct GeneralizationTerms {
  double calibration = 0.0;  // (1/m) ||X (w - q)||^2
  double mismatch = 0.0;     // (w - q)^T (Zhat - X^T X / m) (w - q)
  double empirical = 0.0;    // mean over rows z of Z of |z^T (w - q)|^2

  double sum() const { return calibration + mismatch; }
};

inline GeneralizationTerms generalization_decomposition(const MatrixRef& x, const VectorRef& w,
                                                        const VectorRef& q, const MatrixRef& z) {
  require(z.rows() > 0, ErrorCode::kDimensionMismatch, "Z must have at least one row");
  require(z.cols() == x.cols() && w.size() == x.cols() && q.size() == x.cols(),
          ErrorCode::kDimensionMismatch, "X, Z, w and q must agree on N");
  const Vector d = w - q;
  const double m = static_cast<double>(x.rows());
  const double k = static_cast<double>(z.rows());
  const Matrix zhat = z.transpose() * z / k;
  const Matrix xhat = x.transpose() * x / m;
  GeneralizationTerms out;
  out.calibration = (x * d).squaredNorm() / m;
  out.mismatch = d.dot((zhat - xhat) * d);
  out.empirical = (z * d).squaredNorm() / k;
  return out;
}

}  // namespace qlab
