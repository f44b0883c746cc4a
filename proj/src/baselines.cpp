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

#include "bipgd/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "bipgd/core_qp.hpp"

namespace bipgd {

const char* to_string(BaselineMethod method) {
  return method == BaselineMethod::AID ? "aid" : "bome";
}

double BaselineConfig::resolved_inner_step(const ProblemOracles& oracles) const {
  if (inner_step) return *inner_step;
  if (oracles.constants.L_yy_g && *oracles.constants.L_yy_g > 0.0) {
    return 1.0 / *oracles.constants.L_yy_g;
  }
  return 0.1;
}

void BaselineConfig::validate() const {
  if (!(outer_step > 0.0)) throw ConfigError("outer_step must be positive");
  if (inner_iters < 1) throw ConfigError("inner_iters must be at least 1");
  if (inner_step && !(*inner_step > 0.0)) throw ConfigError("inner_step must be positive");
  if (!(cg_tol > 0.0)) throw ConfigError("cg_tol must be positive");
  if (cg_max_iters < 1) throw ConfigError("cg_max_iters must be at least 1");
  if (!(bome_eta > 0.0)) throw ConfigError("bome_eta must be positive");
  if (K < 1) throw ConfigError("K must be at least 1");
  if (record_every && *record_every < 1) throw ConfigError("record_every must be at least 1");
}

CgResult cg_solve(const std::function<Vec(const Vec&)>& hvp, const Vec& b, double tol,
                  std::int64_t max_iters) {
  if (!(tol > 0.0)) throw ConfigError("cg_solve: tol must be positive");
  const double threshold = tol * std::max(1.0, b.norm());
  CgResult result;
  result.v = Vec::Zero(b.size());
  Vec r = b;
  result.residual = r.norm();
  if (result.residual <= threshold) {
    result.converged = true;
    return result;
  }
  Vec p = r;
  double rr = r.squaredNorm();
  while (result.iterations < max_iters) {
    const Vec ap = hvp(p);
    const double curvature = p.dot(ap);
    if (!(curvature > 0.0)) {
      throw IndefiniteError("cg_solve: nonpositive curvature " + std::to_string(curvature) +
                            " at iteration " + std::to_string(result.iterations));
    }
    const double step = rr / curvature;
    result.v += step * p;
    r -= step * ap;
    ++result.iterations;
    const double rr_next = r.squaredNorm();
    if (std::sqrt(rr_next) <= threshold) {
      // The recursive residual drifts; confirm with the true one and restart
      // from it if needed.
      r = b - hvp(result.v);
      result.residual = r.norm();
      if (result.residual <= threshold) {
        result.converged = true;
        return result;
      }
      p = r;
      rr = r.squaredNorm();
      continue;
    }
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  result.residual = (b - hvp(result.v)).norm();
  result.converged = result.residual <= threshold;
  return result;
}

Vec aid_hypergradient(const ProblemOracles& oracles, const Vec& x, const Vec& y,
                      const BaselineConfig& config) {
  const BlockVec gf = oracles.grad_f(x, y);
  const CgResult cg = cg_solve([&](const Vec& v) { return oracles.hvp_yy(x, y, v); }, gf.y,
                               config.cg_tol, config.cg_max_iters);
  return gf.x - oracles.hvp_yx(x, y, cg.v);
}

namespace {

bool OutOfBounds(const Vec& v) {
  return !v.allFinite() || (v.size() > 0 && v.cwiseAbs().maxCoeff() > kDivergenceBound);
}

// Shared bookkeeping of the baseline loops.
class BaselineRecorder {
 public:
  BaselineRecorder(const BenchmarkProblem& problem, const BaselineConfig& config,
                   const IterationObserver& observer, const OracleCounts& counts)
      : problem_(problem),
        observer_(observer),
        counts_(counts),
        K_(config.K),
        every_(config.record_every.value_or(std::max<std::int64_t>(1, config.K / 10000))),
        start_(std::chrono::steady_clock::now()) {
    trace_.problem_name = problem.name;
    trace_.schedule_name = to_string(config.method);
    trace_.config.K = config.K;
    trace_.config.record_every = every_;
  }

  void step(std::int64_t k, const Vec& x, const Vec& y, double h, double delta_sq,
            double lambda) {
    trace_.totals.iterations += 1;
    trace_.totals.sum_delta_sq += delta_sq;
    trace_.totals.sum_h += h;
    const bool keep = k == 0 || k == K_ - 1 || k % every_ == 0;
    if (!keep && !observer_) return;
    IterateRecord rec;
    rec.k = k;
    rec.f_val = problem_.oracles.f_eval(x, y);
    rec.h_val = h;
    rec.grad_h_sq = grad_h(problem_.oracles, x, y).squaredNorm();
    rec.delta_sq = delta_sq;
    rec.lambda = lambda;
    rec.kkt_stationarity = delta_sq;
    rec.wall_nanos = std::chrono::duration_cast<std::chrono::nanoseconds>(
                         std::chrono::steady_clock::now() - start_)
                         .count();
    rec.oracle_calls = counts_;
    if (observer_) observer_(rec, x, y);
    if (keep) trace_.records.push_back(rec);
  }

  void check(std::int64_t k, const Vec& x, const Vec& y) {
    if (OutOfBounds(x) || OutOfBounds(y)) {
      trace_.final_x = x;
      trace_.final_y = y;
      trace_.oracle_calls = counts_;
      throw DivergenceError("iteration " + std::to_string(k) + ": iterate diverged",
                            std::move(trace_));
    }
  }

  Trace finish(Vec x, Vec y) {
    trace_.final_x = std::move(x);
    trace_.final_y = std::move(y);
    trace_.oracle_calls = counts_;
    return std::move(trace_);
  }

 private:
  const BenchmarkProblem& problem_;
  const IterationObserver& observer_;
  const OracleCounts& counts_;
  std::int64_t K_;
  std::int64_t every_;
  std::chrono::steady_clock::time_point start_;
  Trace trace_;
};

}  // namespace

Trace aid_run(const BenchmarkProblem& problem, const Vec& x0, const BaselineConfig& config,
              const std::optional<Vec>& y0, const IterationObserver& observer) {
  config.validate();
  if (!problem.strongly_convex) {
    throw ConfigError("AID requires a strongly convex lower level; '" + problem.name +
                      "' is not flagged as such");
  }
  OracleCounts counts;
  const ProblemOracles oracles = with_call_counter(problem.oracles, counts);
  const double inner_step = config.resolved_inner_step(problem.oracles);
  BaselineRecorder recorder(problem, config, observer, counts);

  Vec x = x0;
  Vec y = y0.value_or(problem.y0);
  for (std::int64_t k = 0; k < config.K; ++k) {
    for (std::int64_t t = 0; t < config.inner_iters; ++t) y -= inner_step * oracles.grad_y_g(x, y);
    const Vec hypergrad = aid_hypergradient(oracles, x, y, config);
    // h is a reported metric only, evaluated outside the call counters.
    recorder.step(k, x, y, eval_h(problem.oracles, x, y), hypergrad.squaredNorm(), 0.0);
    x -= config.outer_step * hypergrad;
    recorder.check(k, x, y);
  }
  return recorder.finish(std::move(x), std::move(y));
}

Trace bome_run(const BenchmarkProblem& problem, const Vec& x0, const Vec& y0,
               const BaselineConfig& config, const IterationObserver& observer) {
  config.validate();
  if (!problem.oracles.grad_x_g) {
    throw ConfigError("BOME needs grad_x_g, which '" + problem.name + "' does not provide");
  }
  OracleCounts counts;
  const ProblemOracles oracles = with_call_counter(problem.oracles, counts);
  const double inner_step = config.resolved_inner_step(problem.oracles);
  BaselineRecorder recorder(problem, config, observer, counts);

  Vec x = x0;
  Vec y = y0;
  for (std::int64_t k = 0; k < config.K; ++k) {
    Vec y_hat = y;
    for (std::int64_t t = 0; t < config.inner_iters; ++t) {
      y_hat -= inner_step * oracles.grad_y_g(x, y_hat);
    }
    const BlockVec gf = oracles.grad_f(x, y);
    const Vec gy = oracles.grad_y_g(x, y);
    const BlockVec gq{oracles.grad_x_g(x, y) - oracles.grad_x_g(x, y_hat), gy};
    const double gq_sq = gq.squaredNorm();
    double lambda = 0.0;
    if (gq_sq > kDefaultDenomTol * std::max(1.0, gf.squaredNorm())) {
      lambda = std::max(0.0, config.bome_eta * std::sqrt(gq_sq) - gf.dot(gq)) / gq_sq;
    }
    const BlockVec d{gf.x + lambda * gq.x, gf.y + lambda * gq.y};
    recorder.step(k, x, y, gy.squaredNorm(), d.squaredNorm(), lambda);
    x -= config.outer_step * d.x;
    y -= config.outer_step * d.y;
    recorder.check(k, x, y);
  }
  return recorder.finish(std::move(x), std::move(y));
}

}  // namespace bipgd
