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

#ifndef BIPGD_BASELINES_HPP_
#define BIPGD_BASELINES_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "bipgd/oracles.hpp"
#include "bipgd/problems.hpp"
#include "bipgd/solver.hpp"

namespace bipgd {

enum class BaselineMethod { AID, BOME };

const char* to_string(BaselineMethod method);

struct BaselineConfig {
  BaselineMethod method = BaselineMethod::AID;
  double outer_step = 0.1;
  std::int64_t inner_iters = 5;
  // Unset means 1/L_yy_g when known, otherwise 0.1.
  std::optional<double> inner_step;
  double cg_tol = 1e-10;
  std::int64_t cg_max_iters = 100;
  double bome_eta = 0.5;
  std::int64_t K = 1000;
  // Unset means max(1, K / 10^4).
  std::optional<std::int64_t> record_every;

  double resolved_inner_step(const ProblemOracles& oracles) const;
  void validate() const;
};

// Negative curvature met along a conjugate-gradient search direction.
class IndefiniteError : public Error {
 public:
  using Error::Error;
};

struct CgResult {
  Vec v;
  std::int64_t iterations = 0;
  // ||hvp(v) - b||
  double residual = 0.0;
  bool converged = false;
};

// Matrix-free conjugate gradient for hvp(v) = b, stopping at
// ||hvp(v) - b|| <= tol * max(1, ||b||). The true residual is re-checked
// before returning.
CgResult cg_solve(const std::function<Vec(const Vec&)>& hvp, const Vec& b, double tol,
                  std::int64_t max_iters);

// F(x, y) = grad_x f - hvp_yx(v) with v solving hvp_yy(v) = grad_y f.
Vec aid_hypergradient(const ProblemOracles& oracles, const Vec& x, const Vec& y,
                      const BaselineConfig& config);

// Double loop: inner_iters gradient steps on g(x, .) warm-started from the
// previous y, then x <- x - outer_step F(x, y). Records ||F||^2 as the
// stationarity metric. Requires a strongly convex lower level.
Trace aid_run(const BenchmarkProblem& problem, const Vec& x0, const BaselineConfig& config,
              const std::optional<Vec>& y0 = std::nullopt,
              const IterationObserver& observer = {});

// First-order value-function method. Each outer step runs inner_iters
// gradient steps on g(x, .) from y to get y_hat, forms
// q(x, y) = g(x, y) - g(x, y_hat) and moves (x, y) along -(grad f + l grad q)
// with l = [eta ||grad q|| - grad f' grad q]_+ / ||grad q||^2.
Trace bome_run(const BenchmarkProblem& problem, const Vec& x0, const Vec& y0,
               const BaselineConfig& config, const IterationObserver& observer = {});

}  // namespace bipgd

#endif  // BIPGD_BASELINES_HPP_
