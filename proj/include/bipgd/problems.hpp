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

#ifndef BIPGD_PROBLEMS_HPP_
#define BIPGD_PROBLEMS_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "bipgd/oracles.hpp"

namespace bipgd {

struct ProblemMetadata {
  std::uint64_t seed = 0;
  int dim_x = 0;
  int dim_y = 0;
  std::optional<double> condition_number;
  std::optional<double> corruption_rate;
  // Generator-specific scalars (regularizer weight, sigma_plus_min, ...).
  std::map<std::string, double> extra;
};

// A named oracle bundle with what is known about it. The lower-level
// objective g lives in oracles.g_eval.
struct BenchmarkProblem {
  std::string name;
  ProblemOracles oracles;
  ProblemMetadata metadata;
  bool strongly_convex = false;
  // A valid lower bound on inf f.
  std::optional<double> f_lower_bound;
  // Closed-form (or converged) lower-level solution y*(x), when available.
  std::function<Vec(const Vec& x)> lower_solution;
  // Gradient of l(x) = f(x, y*(x)), when available in closed form.
  std::function<Vec(const Vec& x)> hypergradient;
  // Classification accuracy of the lower-level variable on held-out data.
  std::function<double(const Vec& y)> test_accuracy;
  // Default starting point.
  Vec x0;
  Vec y0;
  // Standard deviations used when sampling validation points around (x0, y0).
  double sample_scale_x = 1.0;
  double sample_scale_y = 1.0;
};

// rows x cols matrix U diag(s) V' with seeded random orthogonal U, V and
// singular values linearly spaced in [1 / sqrt(max_cond), sqrt(max_cond)].
Mat make_conditioned_matrix(std::uint64_t seed, int rows, int cols, double max_cond);

// f = sin(c'x + d'y) + log(||x + y||^2 + 1), g = 1/2 ||Hy - x||^2, cond(H) <= 10.
BenchmarkProblem make_sc_synthetic(std::uint64_t seed, int n = 20);

// Same f and H, g = cos(1/2 ||Hy - x||^2).
BenchmarkProblem make_nc_synthetic(std::uint64_t seed, int n = 20);

// f = ||y - y_target||^2, g = ||y - A softmax(x)||^2 with x in R^4, y in R^2.
BenchmarkProblem make_coreset(std::uint64_t seed = 0);

struct DhcParams {
  std::uint64_t seed = 0;
  int n_features = 50;
  int n_classes = 10;
  int n_train = 1000;
  int n_val = 500;
  int n_test = 500;
  double corruption = 0.25;
  double regularizer = 1e-3;
  // Spread of the class means relative to the unit within-class noise.
  double class_separation = 0.6;
};

// Data hyper-cleaning on a seeded Gaussian-cluster dataset. x holds one
// logit weight per training sample, y the d x C classifier (column-major).
// f is the mean validation cross-entropy, g the sigmoid(x)-weighted mean
// training cross-entropy plus regularizer * ||y||^2.
BenchmarkProblem make_dhc(const DhcParams& params);

// g = 1/2 ||Ay - Bx||^2 with seeded A (p x m) and B (p x n); f as in
// make_sc_synthetic, pairing x_i with y_i over the common prefix.
BenchmarkProblem make_regularity_example(std::uint64_t seed, int p, int m, int n);

// f = 1/2 (x^2 + y^2), g = 1/2 (y - x)^2.
BenchmarkProblem make_quadratic_toy();

// Accelerated gradient descent with adaptive restart on g(x, .) from y_init
// until ||grad_y g||^2 <= tol. Needs constants.L_yy_g.
Vec solve_lower_level(const ProblemOracles& oracles, const Vec& x, const Vec& y_init,
                      double tol, std::int64_t max_iters);

struct FdEntry {
  std::string name;
  double rel_error = 0.0;
};

struct FdReport {
  std::vector<FdEntry> entries;
  double max_rel_error = 0.0;
};

// Central-difference checks of grad_f, grad_y_g, grad_x_g, grad h and both
// HVPs at (x, y). The difference step is step * max(1, ||(x, y)||_inf).
// Small problems are probed coordinate-wise, large ones along seeded random
// directions.
FdReport finite_diff_check(const BenchmarkProblem& problem, const Vec& x, const Vec& y,
                           double step = 1e-6, std::uint64_t probe_seed = 0);

// max |u' hvp_yy(v) - v' hvp_yy(u)| over `probes` seeded unit pairs.
double hvp_symmetry_error(const ProblemOracles& oracles, const Vec& x, const Vec& y,
                          std::uint64_t seed, int probes = 5);

// Seeded point near the problem's default start.
std::pair<Vec, Vec> sample_point(const BenchmarkProblem& problem, std::uint64_t seed);

}  // namespace bipgd

#endif  // BIPGD_PROBLEMS_HPP_
