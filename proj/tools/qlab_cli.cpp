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
#include "qlab_cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <thread>

#include "qlab/qlab.hpp"

namespace qlab::cli {
namespace {

using nlohmann::json;

const std::vector<std::string> kCommands = {"quantize",   "bounds",      "verify",
                                            "montecarlo", "adversarial", "oracle-compare"};

double parse_double(const std::string& text, const std::string& flag) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  require(ec == std::errc() && ptr == text.data() + text.size() && std::isfinite(value),
          ErrorCode::kInvalidArgument, flag + " expects a real number, got '" + text + "'");
  return value;
}

Dampening parse_lambda(const std::string& text) {
  if (text == "auto") return Dampening::automatic();
  const double v = parse_double(text, "--lambda");
  require(v >= 0.0, ErrorCode::kInvalidLambda, "--lambda must be nonnegative or 'auto'");
  return Dampening::fixed(v);
}

Alphabet parse_alphabet(const std::string& bits, double delta) {
  require(delta > 0.0 && std::isfinite(delta), ErrorCode::kInvalidArgument,
          "--delta must be positive");
  if (bits == "inf") return Alphabet::infinite(delta);
  int b = 0;
  const auto [ptr, ec] = std::from_chars(bits.data(), bits.data() + bits.size(), b);
  require(ec == std::errc() && ptr == bits.data() + bits.size(), ErrorCode::kInvalidArgument,
          "--bits expects an integer or 'inf', got '" + bits + "'");
  return Alphabet::finite(delta, b);
}

QuantConfig make_config(const ExperimentSpec& s) {
  QuantConfig cfg;
  cfg.lambda = parse_lambda(s.lambda);
  cfg.order = s.order == "desc" ? ColumnOrder::kDescendingNorm : ColumnOrder::kNone;
  cfg.formulation = s.form == "ls" ? Formulation::kLeastSquares : Formulation::kCholesky;
  cfg.alphabet = parse_alphabet(s.bits, s.delta);
  cfg.rounding = s.round == "stoc" ? RoundingMode::stochastic(s.seed) : RoundingMode::deterministic();
  return cfg;
}

std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("QLAB_THREADS")) {
    std::size_t v = 0;
    const std::string_view sv(env);
    const auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), v);
    if (ec == std::errc() && ptr == sv.data() + sv.size() && v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

json number(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

json vector_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(number(v(i)));
  return out;
}

json spec_json(const ExperimentSpec& s) {
  json config = {
      {"command", s.command},
      {"x", s.x_path},
      {"w", s.w_path},
      {"xtilde", s.xtilde_path},
      {"out", s.out_path},
      {"q_out", s.q_out_path},
      {"table_out", s.table_out_path},
      {"format", s.format == MatrixFormat::kCsv ? "csv" : "raw"},
      {"algo", s.algo},
      {"lambda", s.lambda},
      {"delta", s.delta},
      {"bits", s.bits},
      {"order", s.order},
      {"form", s.form},
      {"round", s.round},
      {"ls_init", s.ls_init},
      {"seed", s.seed},
      {"p", s.p},
      {"pprime", s.pprime},
      {"trials", s.trials},
      {"rank", s.rank},
      {"sizes", s.sizes},
      {"variant", s.variant},
      {"basis", s.basis},
      {"threads", s.threads},
  };
  return {{"argv", s.argv}, {"config", config}};
}

struct Loaded {
  std::string path;
  Matrix m;
};

Loaded load_required(const std::string& path, const std::string& flag, MatrixFormat format) {
  require(!path.empty(), ErrorCode::kInvalidArgument, "this command needs " + flag);
  return {path, load_matrix(path, format)};
}

json input_json(const Loaded& in) {
  return {{"path", in.path},
          {"rows", in.m.rows()},
          {"cols", in.m.cols()},
          {"digest", matrix_digest(in.m)}};
}

json realized_json(const Matrix& target, const Matrix& approx, const Matrix& w, const Matrix& q) {
  const Matrix e = target - approx;
  const Matrix d = w - q;
  return {{"xwq_l2", e.norm()},
          {"xwq_inf", e.cwiseAbs().maxCoeff()},
          {"wq_l2", d.norm()},
          {"wq_inf", d.cwiseAbs().maxCoeff()}};
}

json bounds_json(const BoundReport& r) {
  return {{"lambda", r.lambda},
          {"delta", r.delta},
          {"C2", r.c2},
          {"Cinf", r.cinf},
          {"proj_norms", vector_json(r.proj_norms)},
          {"sigma_mins", vector_json(r.sigma_mins)},
          {"l2_bound_xwq", number(r.l2_bound_xwq)},
          {"l2_bound_wq", number(r.l2_bound_wq)},
          {"linf_bound_xwq", number(r.linf_bound_xwq)},
          {"linf_bound_wq", number(r.linf_bound_wq)},
          {"p", r.p},
          {"pprime", r.pprime},
          {"layer_cols", r.layer_cols},
          {"failure_prob", r.failure_prob}};
}

json check_json(const BoundCheck& c) {
  return {{"name", c.name},
          {"realized", c.realized},
          {"bound", number(c.bound)},
          {"slack", number(c.slack)},
          {"holds", c.holds}};
}

json mc_json(const MonteCarloVerdict& v) {
  return {{"trials", v.trials},
          {"failures", v.failures},
          {"rate", v.rate},
          {"predicted", v.predicted},
          {"allowance", v.allowance},
          {"bound", number(v.bound)},
          {"bound_w", number(v.bound_w)},
          {"max_ratio", v.max_ratio},
          {"max_early_residual", v.max_early_residual},
          {"vacuous", v.vacuous},
          {"pass", v.pass}};
}

void maybe_save_q(const ExperimentSpec& s, const Matrix& q) {
  if (!s.q_out_path.empty()) save_matrix(s.q_out_path, q, s.format);
}

bool deterministic_infinite(const QuantConfig& cfg) {
  return !cfg.rounding.is_stochastic() && !cfg.alphabet.is_finite();
}

/// Per-column deterministic l2 checks; returns (all hold, summary).
std::pair<bool, json> l2_checks(const ExperimentSpec& s, const Loaded& x, const Loaded& w,
                                const Matrix* xtilde, const QuantResult& r,
                                const QuantConfig& cfg) {
  json columns = json::array();
  bool all = true;
  double min_slack = std::numeric_limits<double>::infinity();
  for (Index c = 0; c < w.m.cols(); ++c) {
    json col = json::array();
    if (xtilde != nullptr) {
      const QronosInput in{x.m, *xtilde, w.m.col(c), cfg, s.ls_init};
      const auto chk = check_qronos_l2(in, r, s.delta, c);
      all = all && chk.holds;
      min_slack = std::min(min_slack, chk.slack);
      col.push_back(check_json(chk));
    } else {
      const auto v = check_l2_theorem(x.m, w.m.col(c), r, s.delta, c);
      all = all && v.holds();
      min_slack = std::min(min_slack, v.min_slack());
      for (const auto& chk : v.checks) col.push_back(check_json(chk));
    }
    columns.push_back(col);
  }
  return {all, {{"holds", all}, {"min_slack", number(min_slack)}, {"columns", columns}}};
}

RunOutcome run_quantize(const ExperimentSpec& s, bool verify_only) {
  const QuantConfig cfg = make_config(s);
  const auto x = load_required(s.x_path, "--x", s.format);
  const auto w = load_required(s.w_path, "--w", s.format);
  const bool qronos = s.algo == "qronos";
  Loaded xt;
  if (qronos) xt = load_required(s.xtilde_path, "--xtilde", s.format);
  const std::size_t threads = resolve_threads(s.threads);

  QuantResult r = qronos ? qronos_layer(x.m, xt.m, w.m, cfg, s.ls_init, threads)
                         : optq_layer(x.m, w.m, cfg, threads);
  maybe_save_q(s, r.q);

  RunOutcome out;
  json& rep = out.report;
  rep["inputs"] = {{"x", input_json(x)}, {"w", input_json(w)}};
  if (qronos) rep["inputs"]["xtilde"] = input_json(xt);
  rep["lambda"] = r.lambda;
  const Matrix& basis = qronos ? xt.m : x.m;
  rep["realized"] = realized_json(x.m * w.m, basis * r.q, w.m, r.q);
  const Matrix xp = permute_columns(basis, r.permutation);
  rep["bounds"] = bounds_json(bound_report(xp, r.lambda, s.delta, w.m.cols(), s.p, s.pprime));
  Index saturated = 0;
  for (const auto& t : r.traces) saturated += t.saturation_count();
  rep["saturated_steps"] = saturated;

  json verdicts = json::object();
  bool pass = true;
  if (deterministic_infinite(cfg)) {
    auto [holds, detail] = l2_checks(s, x, w, qronos ? &xt.m : nullptr, r, cfg);
    verdicts["l2_bound"] = holds;
    rep["l2_checks"] = detail;
    pass = holds;
  } else if (verify_only) {
    throw Error(ErrorCode::kInvalidArgument,
                "verify needs deterministic rounding on an infinite grid (--round det --bits inf)");
  }
  rep["verdicts"] = verdicts;
  rep["pass"] = pass;
  out.exit_code = pass ? kExitPass : kExitViolation;
  return out;
}

RunOutcome run_bounds(const ExperimentSpec& s) {
  const QuantConfig cfg = make_config(s);
  const auto x = load_required(s.x_path, "--x", s.format);
  Index layer_cols = 1;
  RunOutcome out;
  out.report["inputs"] = {{"x", input_json(x)}};
  if (!s.w_path.empty()) {
    const auto w = load_required(s.w_path, "--w", s.format);
    layer_cols = w.m.cols();
    out.report["inputs"]["w"] = input_json(w);
  }
  const Matrix xp = cfg.order == ColumnOrder::kDescendingNorm ? reorder_descending(x.m).x : x.m;
  const double lambda = cfg.lambda.resolve(x.m);
  out.report["bounds"] = bounds_json(bound_report(xp, lambda, s.delta, layer_cols, s.p, s.pprime));
  out.report["verdicts"] = json::object();
  out.report["pass"] = true;
  return out;
}

RunOutcome run_montecarlo(const ExperimentSpec& s) {
  QuantConfig cfg = make_config(s);
  require(s.trials >= 1, ErrorCode::kInvalidArgument, "--trials must be at least 1");
  const auto x = load_required(s.x_path, "--x", s.format);
  const auto w = load_required(s.w_path, "--w", s.format);
  const MonteCarloOptions opts{s.trials, s.seed, s.p, s.pprime, resolve_threads(s.threads)};
  RunOutcome out;
  json& rep = out.report;
  rep["inputs"] = {{"x", input_json(x)}, {"w", input_json(w)}};
  MonteCarloVerdict v;
  std::string kind;
  if (s.rank > 0) {
    kind = "lowrank_linf";
    v = check_lowrank_corollary(x.m, w.m, s.rank, s.delta, opts, cfg.order);
  } else if (s.algo == "qronos") {
    kind = "qronos_linf";
    const auto xt = load_required(s.xtilde_path, "--xtilde", s.format);
    rep["inputs"]["xtilde"] = input_json(xt);
    v = check_qronos_linf_mc(x.m, xt.m, w.m, cfg, s.ls_init, opts);
  } else {
    kind = "optq_linf";
    v = check_linf_theorem_mc(x.m, w.m, cfg, opts);
  }
  rep["montecarlo"] = mc_json(v);
  rep["montecarlo"]["kind"] = kind;
  rep["verdicts"] = {{kind, v.pass}};
  rep["pass"] = v.pass;
  out.exit_code = v.pass ? kExitPass : kExitViolation;
  return out;
}

RunOutcome run_adversarial(const ExperimentSpec& s) {
  require(s.basis == "hadamard", ErrorCode::kInvalidArgument,
          "--basis supports only 'hadamard'");
  require(!s.sizes.empty(), ErrorCode::kInvalidArgument, "--sizes must not be empty");
  const auto variant =
      s.variant == "alternating" ? AdversarialVariant::kAlternating : AdversarialVariant::kMonotone;
  std::vector<Index> sizes(s.sizes.begin(), s.sizes.end());
  const auto form = s.form == "ls" ? Formulation::kLeastSquares : Formulation::kCholesky;
  const auto rows = scaling_report(sizes, variant, form);

  RunOutcome out;
  json table = json::array();
  bool exact = true;
  std::ostringstream csv;
  csv << "N,linf_error,weight_drift,w_inf,matches_expected\n";
  csv.precision(17);
  for (const auto& r : rows) {
    const double n = static_cast<double>(r.n);
    exact = exact && r.matches_expected &&
            std::abs(r.linf_error - std::sqrt(n) / 3.0) <= 1e-9 &&
            std::abs(r.weight_drift - n / 3.0) <= 1e-9;
    table.push_back({{"N", r.n},
                     {"linf_error", r.linf_error},
                     {"weight_drift", r.weight_drift},
                     {"w_inf", r.w_inf},
                     {"matches_expected", r.matches_expected}});
    csv << r.n << ',' << r.linf_error << ',' << r.weight_drift << ',' << r.w_inf << ','
        << (r.matches_expected ? 1 : 0) << '\n';
  }
  if (!s.table_out_path.empty()) write_file(s.table_out_path, csv.str());
  out.report["scaling"] = table;
  out.report["verdicts"] = {{"adversarial_scaling", exact}};
  out.report["pass"] = exact;
  out.exit_code = exact ? kExitPass : kExitViolation;
  return out;
}

RunOutcome run_oracle_compare(const ExperimentSpec& s) {
  QuantConfig cfg = make_config(s);
  require(cfg.alphabet.is_finite(), ErrorCode::kInvalidArgument,
          "oracle-compare needs a finite grid (--bits <int>)");
  const auto x = load_required(s.x_path, "--x", s.format);
  const auto w = load_required(s.w_path, "--w", s.format);
  const auto r = optq_layer(x.m, w.m, cfg, resolve_threads(s.threads));
  RunOutcome out;
  json cols = json::array();
  bool pass = true;
  for (Index c = 0; c < w.m.cols(); ++c) {
    const Vector wc = w.m.col(c);
    const auto sol = brute_force_ils(x.m, wc, cfg.alphabet);
    const double optq = (x.m * (wc - r.q.col(c))).squaredNorm();
    const double msq_obj = (x.m * (wc - msq(wc, cfg.alphabet))).squaredNorm();
    const bool ok = within_bound(sol.objective, optq) && within_bound(sol.objective, msq_obj);
    pass = pass && ok;
    cols.push_back({{"oracle", sol.objective},
                    {"optq", optq},
                    {"msq", msq_obj},
                    {"nodes_visited", sol.nodes_visited},
                    {"q_star", vector_json(sol.q_star)},
                    {"oracle_is_minimal", ok}});
  }
  out.report["inputs"] = {{"x", input_json(x)}, {"w", input_json(w)}};
  out.report["objectives"] = cols;
  out.report["verdicts"] = {{"oracle_dominance", pass}};
  out.report["pass"] = pass;
  out.exit_code = pass ? kExitPass : kExitViolation;
  return out;
}

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotPositiveDefinite:
      return kExitNumerical;
    default:
      return kExitUsage;
  }
}

ExperimentSpec parse_args(const std::vector<std::string>& args) {
  ExperimentSpec s;
  s.argv = args;
  CLI::App app{"qlab: post-training quantization laboratory"};
  std::string format = "csv";
  app.add_option("command", s.command, "quantize | bounds | verify | montecarlo | adversarial | oracle-compare")
      ->required()
      ->check(CLI::IsMember(kCommands));
  app.add_option("--x", s.x_path, "calibration matrix X (m x N)");
  app.add_option("--w", s.w_path, "weights W (N x N')");
  app.add_option("--xtilde", s.xtilde_path, "drifted calibration matrix for Qronos");
  app.add_option("--out", s.out_path, "report path (stdout when omitted)");
  app.add_option("--q-out", s.q_out_path, "write the quantized weights here");
  app.add_option("--table-out", s.table_out_path, "CSV scaling table (adversarial)");
  app.add_option("--format", format, "matrix file format")->check(CLI::IsMember({"csv", "raw"}));
  app.add_option("--algo", s.algo)->check(CLI::IsMember({"optq", "qronos"}));
  app.add_option("--lambda", s.lambda, "dampening: real >= 0 or 'auto'");
  app.add_option("--delta", s.delta, "grid step");
  app.add_option("--bits", s.bits, "bit width or 'inf'");
  app.add_option("--order", s.order)->check(CLI::IsMember({"none", "desc"}));
  app.add_option("--form", s.form)->check(CLI::IsMember({"chol", "ls"}));
  app.add_option("--round", s.round)->check(CLI::IsMember({"det", "stoc"}));
  app.add_flag("--ls-init", s.ls_init, "Qronos: start from the least-squares refit of w");
  app.add_option("--seed", s.seed);
  app.add_option("--p", s.p)->check(CLI::PositiveNumber);
  app.add_option("--pprime", s.pprime)->check(CLI::PositiveNumber);
  app.add_option("--trials", s.trials)->check(CLI::PositiveNumber);
  app.add_option("--rank", s.rank, "expected rank of X (montecarlo low-rank check)");
  app.add_option("--sizes", s.sizes, "instance sizes (adversarial)")->delimiter(',');
  app.add_option("--variant", s.variant)->check(CLI::IsMember({"monotone", "alternating"}));
  app.add_option("--basis", s.basis)->check(CLI::IsMember({"hadamard"}));
  app.add_option("--threads", s.threads, "worker threads (default: QLAB_THREADS or all cores)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    throw Error(ErrorCode::kInvalidArgument, app.help());
  } catch (const CLI::ParseError& e) {
    throw Error(ErrorCode::kInvalidArgument, e.what());
  }
  s.format = format == "raw" ? MatrixFormat::kRaw : MatrixFormat::kCsv;
  make_config(s);  // validate lambda / bits / delta early
  return s;
}

RunOutcome run(const ExperimentSpec& s) {
  const auto start = std::chrono::steady_clock::now();
  RunOutcome out;
  if (s.command == "quantize") {
    out = run_quantize(s, false);
  } else if (s.command == "verify") {
    out = run_quantize(s, true);
  } else if (s.command == "bounds") {
    out = run_bounds(s);
  } else if (s.command == "montecarlo") {
    out = run_montecarlo(s);
  } else if (s.command == "adversarial") {
    out = run_adversarial(s);
  } else if (s.command == "oracle-compare") {
    out = run_oracle_compare(s);
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown command '" + s.command + "'");
  }
  out.report["schema_version"] = kSchemaVersion;
  out.report["command"] = s.command;
  out.report["spec"] = spec_json(s);
  out.report["exit_code"] = out.exit_code;
  out.report["wall_time_s"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const bool help = std::any_of(args.begin(), args.end(),
                                [](const std::string& a) { return a == "--help" || a == "-h"; });
  ExperimentSpec spec;
  try {
    spec = parse_args(args);
  } catch (const Error& e) {
    if (help) {
      const std::string text = e.what();
      out << text.substr(text.find(": ") + 2);
      return kExitPass;
    }
    err << "qlab: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    const RunOutcome r = run(spec);
    const std::string text = r.report.dump(2) + "\n";
    if (spec.out_path.empty()) {
      out << text;
    } else {
      write_file(spec.out_path, text);
    }
    return r.exit_code;
  } catch (const Error& e) {
    err << "qlab: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "qlab: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace qlab::cli
