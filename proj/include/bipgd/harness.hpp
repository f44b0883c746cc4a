// Copyright 2026 The bipgd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef BIPGD_HARNESS_HPP_
#define BIPGD_HARNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "bipgd/baselines.hpp"
#include "bipgd/problems.hpp"
#include "bipgd/solver.hpp"

namespace bipgd::harness {

using json = nlohmann::json;

// Exit codes of the command-line front end.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDiverged = 3;

inline constexpr char kTraceCsvHeader[] =
    "k,f,h,grad_h_sq,delta_sq,lambda,kkt_stationarity,oracle_grad_f,oracle_grad_g,oracle_hvp";

// A configuration problem, anchored to a line of the source file.
class ConfigFileError : public ConfigError {
 public:
  ConfigFileError(const std::string& source, int line, const std::string& message)
      : ConfigError(source + ":" + std::to_string(line) + ": " + message), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct ProblemSpec {
  std::string name;
  std::uint64_t seed = 0;
  // sc_synthetic, nc_synthetic, regularity (n = dim x).
  int n = 20;
  // regularity: A is p x m.
  int p = 6;
  int m = 4;
  DhcParams dhc;
};

BenchmarkProblem make_problem(const ProblemSpec& spec);
json problem_to_json(const ProblemSpec& spec, const BenchmarkProblem& problem);

enum class MethodKind { OursCor1, OursCor3, Aid, Bome };

const char* to_string(MethodKind kind);

struct MethodSpec {
  MethodKind kind = MethodKind::OursCor1;
  // Per-method parameter overrides, validated at parse time.
  json overrides = json::object();
};

struct ExperimentConfig {
  ProblemSpec problem;
  std::vector<MethodSpec> methods;
  std::vector<std::int64_t> K_list;
  std::uint64_t seed = 0;
  std::string output_dir = "results";
  bool emit_plot_data = true;
  double C0 = 1.0;
  std::optional<std::int64_t> record_every;
};

// Parses and validates the JSON experiment file. Throws ConfigFileError.
ExperimentConfig parse_experiment_config(const std::string& text, const std::string& source);

struct GlobalOptions {
  std::optional<std::string> output_dir;
  int jobs = 1;
  std::optional<std::int64_t> record_every;
};

struct RunOutcome {
  MethodKind method = MethodKind::OursCor1;
  std::int64_t K = 0;
  Trace trace;
  // Every parameter the run used, defaults materialized.
  json resolved = json::object();
  bool diverged = false;
  std::string error;
  double wall_seconds = 0.0;
};

// Runs one (method, K) job. Divergence is reported in the outcome;
// configuration errors propagate.
RunOutcome run_method(const BenchmarkProblem& problem, const MethodSpec& method, std::int64_t K,
                      const ExperimentConfig& config);

std::string trace_csv(const Trace& trace);

// Writes through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

struct PlotSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

// Line chart with a log-scale y axis.
std::string render_svg(const std::string& title, const std::string& y_label,
                       const std::vector<PlotSeries>& series);

struct ValidationCheck {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool passed = false;
};

struct ValidationReport {
  std::string problem;
  std::vector<ValidationCheck> checks;
  bool passed() const;
  json to_json() const;
};

// Finite-difference, HVP symmetry, step-subproblem and ground-truth checks
// at ten seeded points.
ValidationReport validate_problem(const BenchmarkProblem& problem, std::uint64_t seed);

int cmd_run(const std::string& config_path, const GlobalOptions& options, std::ostream& log);
int cmd_rate_sweep(const std::string& config_path, const GlobalOptions& options,
                   std::ostream& log);
int cmd_validate(const std::string& problem_name, std::uint64_t seed, std::ostream& out,
                 std::ostream& log);
// Same, for an already constructed problem.
int cmd_validate(const BenchmarkProblem& problem, std::uint64_t seed, std::ostream& out,
                 std::ostream& log);

}  // namespace bipgd::harness

#endif  // BIPGD_HARNESS_HPP_
