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

// Command-line front end: argument parsing, dispatch and JSON reports.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "qlab/io.hpp"

namespace qlab::cli {

inline constexpr int kSchemaVersion = 1;

enum ExitCode : int {
  kExitPass = 0,
  kExitViolation = 1,
  kExitUsage = 2,
  kExitNumerical = 3,
};

struct ExperimentSpec {
  std::vector<std::string> argv;
  std::string command;

  std::string x_path;
  std::string w_path;
  std::string xtilde_path;
  std::string out_path;
  std::string q_out_path;
  std::string table_out_path;
  MatrixFormat format = MatrixFormat::kCsv;

  std::string algo = "optq";      // optq | qronos
  std::string lambda = "auto";    // real or "auto"
  double delta = 1.0;
  std::string bits = "inf";       // integer or "inf"
  std::string order = "none";     // none | desc
  std::string form = "chol";      // chol | ls
  std::string round = "det";      // det | stoc
  bool ls_init = false;
  std::uint64_t seed = 0;
  double p = 2.0;
  double pprime = 2.0;
  long trials = 1000;
  long rank = 0;                  // > 0 selects the low-rank check in montecarlo
  std::vector<long> sizes = {4, 16, 64};
  std::string variant = "monotone";  // monotone | alternating
  std::string basis = "hadamard";
  std::size_t threads = 0;        // 0: QLAB_THREADS, else hardware
};

struct RunOutcome {
  nlohmann::json report;
  int exit_code = kExitPass;
};

/// Parses argv; throws qlab::Error(kInvalidArgument) on usage errors.
ExperimentSpec parse_args(const std::vector<std::string>& args);

/// Executes the spec. Module errors propagate as qlab::Error.
RunOutcome run(const ExperimentSpec& spec);

/// Full program: parse, run, write the report. Returns the process exit code.
int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int exit_code_for(ErrorCode code);

}  // namespace qlab::cli
