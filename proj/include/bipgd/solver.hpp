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

#ifndef BIPGD_SOLVER_HPP_
#define BIPGD_SOLVER_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bipgd/core_qp.hpp"
#include "bipgd/oracles.hpp"

namespace bipgd {

enum class RhoVariant { Regular, General };

const char* to_string(RhoVariant variant);
RhoVariant rho_variant_from_string(const std::string& name);

struct SolverConfig {
  std::int64_t K = 1;
  double alpha = 1.0;
  double gamma = 1.0;
  double C0 = 1.0;
  RhoVariant rho_variant = RhoVariant::Regular;
  // h at the initial point; used by RhoVariant::General. run() fills it in
  // when unset.
  std::optional<double> h0;
  double denom_tol = kDefaultDenomTol;
  std::int64_t warm_start_budget = 10000;
  // Warm-start gradient step on g(x0, .); unset means 1/L_yy_g when known,
  // otherwise 1e-2.
  std::optional<double> warm_start_step;
  std::uint64_t seed = 0;
  // Unset means max(1, K / 10^4).
  std::optional<std::int64_t> record_every;

  std::int64_t resolved_record_every() const;
  // Throws ConfigError on a violated invariant.
  void validate() const;
};

struct IterateRecord {
  std::int64_t k = 0;
  double f_val = 0.0;
  double h_val = 0.0;
  double grad_h_sq = 0.0;
  double delta_sq = 0.0;
  double lambda = 0.0;
  double kkt_stationarity = 0.0;
  double rho = 0.0;
  double constraint_slack = 0.0;
  // alpha * rho of this step, kept for the feasibility checks.
  double alpha_rho = 0.0;
  std::int64_t wall_nanos = 0;
  // Cumulative since the start of the run.
  OracleCounts oracle_calls;
};

// Sums over every iteration, recorded or not.
struct TraceTotals {
  std::int64_t iterations = 0;
  double sum_delta_sq = 0.0;
  double sum_grad_h_sq = 0.0;
  double sum_h = 0.0;

  double mean_delta_sq() const { return sum_delta_sq / static_cast<double>(iterations); }
  double mean_grad_h_sq() const { return sum_grad_h_sq / static_cast<double>(iterations); }
  double mean_h() const { return sum_h / static_cast<double>(iterations); }
};

struct Trace {
  SolverConfig config;
  std::vector<IterateRecord> records;
  Vec final_x;
  Vec final_y;
  std::string problem_name;
  std::string schedule_name;
  TraceTotals totals;
  OracleCounts oracle_calls;
};

// The iterate left the region where oracles are trusted (non-finite or a
// coordinate above kDivergenceBound in magnitude).
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, Trace partial)
      : Error(what), partial_(std::move(partial)) {}
  const Trace& partial() const { return partial_; }

 private:
  Trace partial_;
};

class WarmStartError : public Error {
 public:
  WarmStartError(const std::string& what, double final_h) : Error(what), final_h_(final_h) {}
  double final_h() const { return final_h_; }

 private:
  double final_h_;
};

inline constexpr double kDivergenceBound = 1e12;

struct WarmStartResult {
  Vec y;
  std::int64_t iterations = 0;
  double h = 0.0;
};

// Gradient descent on g(x0, .) until ||grad_y g(x0, y)||^2 <= alpha^2 C0.
// The step is halved whenever it increases g (or h, if g_eval is absent).
WarmStartResult warm_start(const ProblemOracles& oracles, const Vec& x0, const Vec& y0,
                           double alpha, double C0, std::int64_t budget, double step);

struct Schedule {
  double alpha = 0.0;
  double gamma = 0.0;
};

// alpha = K^{-1/3}, gamma = min{alpha, 1 / (L_f + alpha L_h)}.
Schedule schedule_cor1(std::int64_t K, double L_f, double L_h);

// alpha = K^{-1/6}, gamma = min{K^{-2/3}, 1 / L_f}.
Schedule schedule_cor3(std::int64_t K, double L_f);

// Called after every iteration with the iterate the record describes.
using IterationObserver =
    std::function<void(const IterateRecord& record, const Vec& x, const Vec& y)>;

// Runs K perturbed gradient steps from (x0, y0), which must already satisfy
// h(x0, y0) <= alpha^2 C0. Records k = 0, k = K - 1 and every
// record_every-th iteration. The observer, when set, sees every iteration.
Trace run(const ProblemOracles& oracles, const SolverConfig& config, const Vec& x0,
          const Vec& y0, const IterationObserver& observer = {});

enum class BestIterateCriterion { MaxOfGradHAndStationarity, MaxOfHAndStationarity };

// Iteration index k of the record minimizing the criterion; ties go to the
// smallest k.
std::int64_t best_iterate(const Trace& trace, BestIterateCriterion criterion);

// Sampled estimates of L_f and of the h constants in a box of the given
// radius around (x0, y0). L_h comes from lipschitz_h_bound. Constants
// already present in oracles.constants are kept.
SmoothnessConstants estimate_constants(const ProblemOracles& oracles, const Vec& x0,
                                       const Vec& y0, double radius, int samples,
                                       std::uint64_t seed);

}  // namespace bipgd

#endif  // BIPGD_SOLVER_HPP_
