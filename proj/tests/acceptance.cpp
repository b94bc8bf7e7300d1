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
// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "qlab/qlab.hpp"

namespace {

using namespace qlab;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

QuantConfig det_config(Dampening lambda, Formulation form, double delta = 1.0) {
  QuantConfig cfg;
  cfg.lambda = lambda;
  cfg.formulation = form;
  cfg.alphabet = Alphabet::infinite(delta);
  return cfg;
}

// 1. Cholesky and least-squares OPTQ agree on every instance.
Outcome formulation_equivalence() {
  const auto start = Clock::now();
  int mismatches = 0;
  for (int i = 0; i < 200; ++i) {
    const Matrix x = gaussian_matrix(32, 16, 1000 + i);
    const Vector w = uniform_vector(16, -1.0, 1.0, 2000 + i);
    const Dampening lambda = i % 2 == 0 ? Dampening::automatic() : Dampening::fixed(0.1);
    const Vector qc = optq_column(x, w, det_config(lambda, Formulation::kCholesky)).column();
    const Vector ql = optq_column(x, w, det_config(lambda, Formulation::kLeastSquares)).column();
    if (qc != ql) ++mismatches;
  }
  const double t = seconds_since(start);
  return {mismatches == 0 && t < 30.0,
          fmt("200 instances, %d mismatches, %.2f s (limit 30 s)", mismatches, t)};
}

// 2. Error identity and orthogonality of the projected terms at lambda = 0.
Outcome error_identity() {
  double worst_rel = 0.0, worst_cos = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Matrix x = gaussian_matrix(32, 16, 1000 + i);
    const Vector w = uniform_vector(16, -1.0, 1.0, 2000 + i);
    const auto res = optq_column(x, w, det_config(Dampening::fixed(0.0), Formulation::kCholesky));
    const auto dec = error_decomposition(x, w, res);
    double sq = 0.0;
    for (const auto& t : dec.terms) sq += t.squaredNorm();
    const double e2 = dec.error.squaredNorm();
    worst_rel = std::max(worst_rel, std::abs(sq - e2) / e2);
    for (std::size_t a = 0; a < dec.terms.size(); ++a)
      for (std::size_t b = a + 1; b < dec.terms.size(); ++b) {
        const double na = dec.terms[a].norm(), nb = dec.terms[b].norm();
        if (na == 0.0 || nb == 0.0) continue;
        worst_cos = std::max(worst_cos, std::abs(dec.terms[a].dot(dec.terms[b])) / (na * nb));
      }
  }
  return {worst_rel < 1e-8 && worst_cos < 1e-8,
          fmt("200 instances, max rel gap %.2e, max |cos| %.2e (tol 1e-8)", worst_rel, worst_cos)};
}

// 3. Deterministic l2 bounds.
Outcome l2_bound() {
  const auto start = Clock::now();
  int violations = 0;
  double min_slack = INFINITY;
  const Index ms[] = {8, 32}, ns[] = {16, 64};
  for (int i = 0; i < 1000; ++i) {
    const Index m = ms[i % 2], n = ns[(i / 2) % 2];
    const Matrix x = gaussian_matrix(m, n, 3000 + i);
    const Vector w = uniform_vector(n, -1.0, 1.0, 4000 + i);
    const auto res = optq_column(x, w, det_config(Dampening::automatic(), Formulation::kCholesky));
    const auto v = check_l2_theorem(x, w, res, 1.0);
    if (!v.holds()) ++violations;
    min_slack = std::min(min_slack, v.min_slack());
  }
  const double t = seconds_since(start);
  return {violations == 0 && t < 120.0,
          fmt("1000 instances, %d violations, min slack %.3e, %.2f s (limit 120 s)", violations,
              min_slack, t)};
}

// 4. Worst-case construction reproduces the predicted output and error growth.
Outcome adversarial_scaling() {
  const std::vector<Index> sizes = {4, 16, 64, 256};
  bool ok = true;
  double worst_gap = 0.0;
  for (auto form : {Formulation::kCholesky, Formulation::kLeastSquares}) {
    for (const auto& row : scaling_report(sizes, AdversarialVariant::kMonotone, form)) {
      const double n = static_cast<double>(row.n);
      const double gap = std::max(std::abs(row.linf_error - std::sqrt(n) / 3.0),
                                  std::abs(row.weight_drift - n / 3.0));
      worst_gap = std::max(worst_gap, gap);
      ok = ok && row.matches_expected && gap <= 1e-9;
    }
  }
  const auto inst = build_instance(4);
  const Vector q = optq_column(inst.x, inst.w, adversarial_config()).column();
  Vector printed(4);
  printed << 1.0, 2.0, 3.0, 4.0;
  const double n4_gap = (inst.w - q - printed / 3.0).cwiseAbs().maxCoeff();
  ok = ok && n4_gap <= 1e-15;
  return {ok, fmt("N in {4,16,64,256}, both forms, max error gap %.2e (tol 1e-9), "
                  "N=4 w-q gap %.2e (tol 1e-15)",
                  worst_gap, n4_gap)};
}

// 5. Stochastic l_inf bound failure rate.
Outcome stochastic_linf() {
  const auto start = Clock::now();
  const Matrix x = gaussian_matrix(32, 16, 5000);
  const Matrix w = uniform_matrix(16, 1, -1.0, 1.0, 5001);
  QuantConfig cfg = det_config(Dampening::automatic(), Formulation::kCholesky);
  MonteCarloOptions opts;
  opts.trials = 10000;
  opts.seed = 5002;
  opts.p = 2.0;
  const auto v = check_linf_theorem_mc(x, w, cfg, opts);
  const double t = seconds_since(start);
  return {v.pass && !v.vacuous && t < 300.0,
          fmt("%lld trials, rate %.4f <= predicted %.4f + 3se %.4f, max ratio %.3f, %.1f s",
              static_cast<long long>(v.trials), v.rate, v.predicted, v.allowance, v.max_ratio,
              t)};
}

// 6. Stochastic rounding is unbiased.
Outcome unbiasedness() {
  const double delta = 0.5;
  const Alphabet a = Alphabet::infinite(delta);
  const int draws = 100000;
  const double tol = 4.0 * delta / std::sqrt(static_cast<double>(draws));
  double worst = 0.0;
  const Vector points = uniform_vector(20, -3.0, 3.0, 6000);
  for (Index i = 0; i < points.size(); ++i) {
    CounterRng rng(6001, static_cast<std::uint64_t>(i));
    double sum = 0.0;
    for (int d = 0; d < draws; ++d) sum += stoc(points(i), a, rng);
    worst = std::max(worst, std::abs(sum / draws - points(i)));
  }
  return {worst <= tol, fmt("20 points x 1e5 draws, max |mean - z| %.2e (tol %.2e)", worst, tol)};
}

// 7. Exact solver dominates OPTQ, which dominates rounding; orthogonal columns tie.
Outcome oracle_dominance() {
  const Alphabet grid = Alphabet::finite(1.0, 1);
  QuantConfig cfg = det_config(Dampening::fixed(0.0), Formulation::kCholesky);
  cfg.alphabet = grid;
  auto objective = [](const Matrix& x, const Vector& w, const Vector& q) {
    return (x * (w - q)).squaredNorm();
  };
  int oracle_above = 0, optq_above_msq = 0, ortho_mismatch = 0;
  for (int i = 0; i < 100; ++i) {
    const Matrix x = gaussian_matrix(6, 4, 7000 + i);
    const Vector w = uniform_vector(4, -1.0, 1.0, 7100 + i);
    const double tol = 1e-12 * (1.0 + objective(x, w, Vector::Zero(4)));
    const double f_oracle = brute_force_ils(x, w, grid).objective;
    const double f_optq = objective(x, w, optq_column(x, w, cfg).column());
    const double f_msq = objective(x, w, msq(w, grid));
    if (f_oracle > f_optq + tol) ++oracle_above;
    if (f_optq > f_msq + tol) ++optq_above_msq;
  }
  for (int i = 0; i < 100; ++i) {
    // Disjoint row supports make the Gram matrix exactly diagonal.
    Matrix x = Matrix::Zero(6, 4);
    const Matrix g = gaussian_matrix(6, 4, 7200 + i);
    for (Index r = 0; r < 6; ++r) x(r, (r + i) % 4) = g(r, r % 4);
    const Vector w = uniform_vector(4, -1.0, 1.0, 7300 + i);
    const Vector q_oracle = brute_force_ils(x, w, grid).q_star;
    const Vector q_optq = optq_column(x, w, cfg).column();
    if (q_oracle != q_optq || q_optq != msq(w, grid)) ++ortho_mismatch;
  }
  return {oracle_above == 0 && optq_above_msq == 0 && ortho_mismatch == 0,
          fmt("100 random: oracle>OPTQ %d, OPTQ>MSQ %d; 100 orthogonal: mismatches %d",
              oracle_above, optq_above_msq, ortho_mismatch)};
}

// 8. Qronos error reconstruction, reduction to OPTQ, leading-term contraction.
Outcome qronos_formula() {
  const double sigmas[] = {0.0, 0.01, 0.1};
  double worst_rel = 0.0;
  int equal_fail = 0, contraction_fail = 0;
  for (int i = 0; i < 200; ++i) {
    const double sigma = sigmas[i % 3];
    QronosInput in;
    in.x = gaussian_matrix(24, 12, 8000 + i);
    in.x_tilde = in.x + sigma * gaussian_matrix(24, 12, 8300 + i);
    in.w = uniform_vector(12, -1.0, 1.0, 8600 + i);
    in.cfg = det_config((i / 3) % 2 == 0 ? Dampening::fixed(0.0) : Dampening::automatic(),
                        Formulation::kLeastSquares);
    const auto res = qronos_column(in);
    const auto dec = qronos_error_decomposition(in, res);
    worst_rel = std::max(worst_rel, (dec.error - dec.sum()).norm() / dec.error.norm());
    const QronosPlan plan(in.x, in.x_tilde, in.cfg);
    const Vector drift = plan.effective_x() * in.w - plan.effective_x_tilde() * in.w;
    if (dec.leading.norm() > drift.norm() * (1.0 + 1e-12) + 1e-300) ++contraction_fail;
    if (sigma == 0.0 && res.column() != optq_column(in.x, in.w, in.cfg).column()) ++equal_fail;
  }
  return {worst_rel < 1e-8 && equal_fail == 0 && contraction_fail == 0,
          fmt("200 instances, max rel gap %.2e (tol 1e-8), Xt=X mismatches %d, "
              "contraction failures %d",
              worst_rel, equal_fail, contraction_fail)};
}

// 9. Rank-deficient calibration data.
Outcome lowrank_corollary() {
  bool ok = true;
  double worst_early = 0.0, worst_rate = 0.0, predicted = 0.0, allowance = 0.0;
  for (int i = 0; i < 3; ++i) {
    const Matrix x = gaussian_matrix(16, 2, 9000 + i) * gaussian_matrix(2, 12, 9100 + i);
    const Matrix w = uniform_matrix(12, 1, -1.0, 1.0, 9200 + i);
    MonteCarloOptions opts;
    opts.trials = 10000;
    opts.seed = 9300 + i;
    const auto v = check_lowrank_corollary(x, w, 2, 1.0, opts);
    ok = ok && v.pass && v.max_early_residual < 1e-8;
    worst_early = std::max(worst_early, v.max_early_residual);
    worst_rate = std::max(worst_rate, v.rate);
    predicted = v.predicted;
    allowance = v.allowance;
  }
  return {ok, fmt("3 instances x 1e4 trials, max residual after N-r %.2e (tol 1e-8), "
                  "max rate %.4f <= %.4f + 3se %.4f",
                  worst_early, worst_rate, predicted, allowance)};
}

// 10. Tail singular values shrink and bound the projection norms.
Outcome sigma_and_projection() {
  int mono_fail = 0, proj_fail = 0;
  const Index ms[] = {4, 6, 8}, ns[] = {12, 16};
  for (int i = 0; i < 100; ++i) {
    const Index m = ms[i % 3], n = ns[(i / 3) % 2];
    const Matrix x = gaussian_matrix(m, n, 10000 + i);
    const Vector s = sigma_min_sequence(x);
    for (Index j = 0; j + 1 <= n - m - 1; ++j)
      if (s(j + 1) > s(j) * (1.0 + 1e-12)) ++mono_fail;
    const double lambda = default_lambda(x);
    const Vector p = projection_residual_norms(augment(x, lambda));
    const Vector b = projection_upper_bounds(x, lambda);
    for (Index j = 0; j < n; ++j)
      if (!within_bound(p(j) * p(j), b(j), b(j))) ++proj_fail;
  }
  return {mono_fail == 0 && proj_fail == 0,
          fmt("100 instances (m < N), monotonicity failures %d, projection bound failures %d",
              mono_fail, proj_fail)};
}

// 11. Huge dampening turns OPTQ into plain rounding.
Outcome large_lambda() {
  int mismatches = 0;
  for (int i = 0; i < 100; ++i) {
    const Matrix x = gaussian_matrix(32, 16, 11000 + i);
    const Vector w = uniform_vector(16, -1.0, 1.0, 11100 + i);
    const auto lambda = Dampening::fixed(1e12 * x.squaredNorm());
    const Vector expect = msq(w, Alphabet::infinite(1.0));
    for (auto form : {Formulation::kCholesky, Formulation::kLeastSquares})
      if (optq_column(x, w, det_config(lambda, form)).column() != expect) ++mismatches;
  }
  return {mismatches == 0, fmt("100 instances x 2 forms, %d mismatches", mismatches)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"formulation equivalence", formulation_equivalence},
      {"error identity", error_identity},
      {"l2 bound", l2_bound},
      {"adversarial scaling", adversarial_scaling},
      {"stochastic linf bound", stochastic_linf},
      {"unbiased rounding", unbiasedness},
      {"oracle dominance", oracle_dominance},
      {"qronos error formula", qronos_formula},
      {"low-rank corollary", lowrank_corollary},
      {"sigma_min and projection bound", sigma_and_projection},
      {"large-lambda degeneration", large_lambda},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const Error& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
