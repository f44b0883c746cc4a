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

// Command-line front end: run, rate-sweep, validate.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "bipgd/harness.hpp"

int main(int argc, char** argv) {
  namespace h = bipgd::harness;
  CLI::App app{"Bilevel perturbed gradient descent benchmark harness"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string output_dir;
  int jobs = 1;
  std::int64_t record_every = 0;
  app.add_option("--output-dir", output_dir, "Override the output directory");
  app.add_option("--jobs", jobs, "Parallel runs")->check(CLI::PositiveNumber);
  app.add_option("--record-every", record_every, "Record every n-th iterate")
      ->check(CLI::PositiveNumber);

  std::string config_path;
  CLI::App* run = app.add_subcommand("run", "Run every method and K in a config");
  run->add_option("config", config_path, "Experiment config (JSON)")->required();

  CLI::App* sweep = app.add_subcommand("rate-sweep", "Fit empirical convergence rates");
  sweep->add_option("config", config_path, "Experiment config (JSON)")->required();

  std::string problem;
  std::uint64_t seed = 0;
  CLI::App* validate = app.add_subcommand("validate", "Check a problem's oracles");
  validate->add_option("problem", problem, "Problem name")->required();
  validate->add_option("--seed", seed, "Seed for the problem and sample points");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : h::kExitConfig;
  }

  h::GlobalOptions options;
  if (!output_dir.empty()) options.output_dir = output_dir;
  options.jobs = jobs;
  if (record_every > 0) options.record_every = record_every;

  try {
    if (*run) return h::cmd_run(config_path, options, std::cerr);
    if (*sweep) return h::cmd_rate_sweep(config_path, options, std::cerr);
    return h::cmd_validate(problem, seed, std::cout, std::cerr);
  } catch (const bipgd::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return h::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return h::kExitFailed;
  }
}
