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

#include "bipgd/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

#include "bipgd/metrics.hpp"

namespace bipgd {

const char* to_string(RhoVariant variant) {
  return variant == RhoVariant::Regular ? "regular" : "general";
}

RhoVariant rho_variant_from_string(const std::string& name) {
  if (name == "regular") return RhoVariant::Regular;
  if (name == "general") return RhoVariant::General;
  throw ConfigError("unknown rho variant '" + name + "' (expected regular or general)");
}

std::int64_t SolverConfig::resolved_record_every() const {
  return record_every.value_or(std::max<std::int64_t>(1, K / 10000));
}

void SolverConfig::validate() const {
  if (K < 1) throw ConfigError("K must be at least 1");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be positive");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be positive");
  if (!(C0 > 0.0) || !std::isfinite(C0)) throw ConfigError("C0 must be positive");
  if (!(denom_tol > 0.0)) throw ConfigError("denom_tol must be positive");
  if (warm_start_budget < 1) throw ConfigError("warm_start_budget must be at least 1");
  if (warm_start_step && !(*warm_start_step > 0.0)) {
    throw ConfigError("warm_start_step must be positive");
  }
  if (record_every && *record_every < 1) throw ConfigError("record_every must be at least 1");
  if (h0 && !(*h0 >= 0.0)) throw ConfigError("h0 must be nonnegative");
}

WarmStartResult warm_start(const ProblemOracles& oracles, const Vec& x0, const Vec& y0,
                           double alpha, double C0, std::int64_t budget, double step) {
  if (budget < 1) throw ConfigError("warm start budget must be at least 1");
  if (!(step > 0.0)) throw ConfigError("warm start step must be positive");
  const double target = alpha * alpha * C0;

  WarmStartResult result{y0, 0, 0.0};
  Vec gy = oracles.grad_y_g(x0, result.y);
  result.h = gy.squaredNorm();
  double merit = oracles.g_eval ? oracles.g_eval(x0, result.y) : result.h;

  while (result.h > target && result.iterations < budget) {
    ++result.iterations;
    Vec candidate = result.y - step * gy;
    const double cand_merit =
        oracles.g_eval ? oracles.g_eval(x0, candidate) : oracles.grad_y_g(x0, candidate).squaredNorm();
    if (!std::isfinite(cand_merit) || cand_merit > merit) {
      step *= 0.5;
      continue;
    }
    result.y = std::move(candidate);
    merit = cand_merit;
    gy = oracles.grad_y_g(x0, result.y);
    result.h = gy.squaredNorm();
  }
  if (!(result.h <= target)) {
    throw WarmStartError("warm start exhausted its budget of " + std::to_string(budget) +
                             " iterations with h = " + std::to_string(result.h) +
                             " > alpha^2 C0 = " + std::to_string(target),
                         result.h);
  }
  return result;
}

Schedule schedule_cor1(std::int64_t K, double L_f, double L_h) {
  if (K < 1) throw ConfigError("schedule_cor1: K must be at least 1");
  if (!(L_f > 0.0) || !(L_h > 0.0)) throw ConfigError("schedule_cor1: L_f, L_h must be positive");
  const double alpha = std::pow(static_cast<double>(K), -1.0 / 3.0);
  return {alpha, std::min(alpha, 1.0 / (L_f + alpha * L_h))};
}

Schedule schedule_cor3(std::int64_t K, double L_f) {
  if (K < 1) throw ConfigError("schedule_cor3: K must be at least 1");
  if (!(L_f > 0.0)) throw ConfigError("schedule_cor3: L_f must be positive");
  const double k = static_cast<double>(K);
  return {std::pow(k, -1.0 / 6.0), std::min(std::pow(k, -2.0 / 3.0), 1.0 / L_f)};
}

namespace {

bool OutOfBounds(const Vec& v) {
  return !v.allFinite() || (v.size() > 0 && v.cwiseAbs().maxCoeff() > kDivergenceBound);
}

}  // namespace

Trace run(const ProblemOracles& oracles, const SolverConfig& config, const Vec& x0,
          const Vec& y0, const IterationObserver& observer) {
  config.validate();
  if (x0.size() != oracles.dim_x || y0.size() != oracles.dim_y) {
    throw ConfigError("initial point dimensions do not match the problem");
  }
  const double h_start = eval_h(oracles, x0, y0);
  const double target = config.alpha * config.alpha * config.C0;
  if (!(h_start <= target)) {
    throw ConfigError("initial point violates ||grad_y g||^2 <= alpha^2 C0 (h = " +
                      std::to_string(h_start) + ", bound = " + std::to_string(target) +
                      "); run warm_start first");
  }

  Trace trace;
  trace.config = config;
  if (config.rho_variant == RhoVariant::General && !trace.config.h0) trace.config.h0 = h_start;
  const double h0 = trace.config.h0.value_or(0.0);
  const std::int64_t every = config.resolved_record_every();

  OracleCounts counts;
  const ProblemOracles counted = with_call_counter(oracles, counts);
  Vec x = x0;
  Vec y = y0;
  const auto start = std::chrono::steady_clock::now();

  auto fail = [&](const std::string& why, std::int64_t k) {
    trace.final_x = x;
    trace.final_y = y;
    trace.oracle_calls = counts;
    throw DivergenceError("iteration " + std::to_string(k) + ": " + why, std::move(trace));
  };

  for (std::int64_t k = 0; k < config.K; ++k) {
    StepResult step;
    double h = 0.0;
    BlockVec gf;
    try {
      gf = counted.grad_f(x, y);
      const Vec gy = counted.grad_y_g(x, y);
      if (!gf.allFinite() || !gy.allFinite()) fail("non-finite gradient", k);
      h = gy.squaredNorm();
      const BlockVec gh = grad_h_from(counted, x, y, gy);
      const double rho = config.rho_variant == RhoVariant::Regular ? rho_regular(gh)
                                                                   : rho_general(gh, h0);
      step = solve_step(gf, gh, rho, config.alpha, config.denom_tol);
    } catch (const EvaluationError& e) {
      fail(e.what(), k);
    }

    const double delta_sq = step.delta.squaredNorm();
    const double grad_h_sq = step.grad_h.squaredNorm();
    trace.totals.iterations += 1;
    trace.totals.sum_delta_sq += delta_sq;
    trace.totals.sum_grad_h_sq += grad_h_sq;
    trace.totals.sum_h += h;

    const bool keep = k == 0 || k == config.K - 1 || k % every == 0;
    if (keep || observer) {
      IterateRecord rec;
      rec.k = k;
      rec.f_val = oracles.f_eval(x, y);
      rec.h_val = h;
      rec.grad_h_sq = grad_h_sq;
      rec.delta_sq = delta_sq;
      rec.lambda = step.lambda;
      rec.kkt_stationarity = delta_sq;
      rec.rho = step.rho;
      rec.constraint_slack = step.constraint_slack;
      rec.alpha_rho = config.alpha * step.rho;
      rec.wall_nanos = std::chrono::duration_cast<std::chrono::nanoseconds>(
                           std::chrono::steady_clock::now() - start)
                           .count();
      rec.oracle_calls = counts;
      if (observer) observer(rec, x, y);
      if (keep) trace.records.push_back(rec);
    }

    x += config.gamma * step.delta.x;
    y += config.gamma * step.delta.y;
    if (OutOfBounds(x) || OutOfBounds(y)) fail("iterate diverged", k);
  }

  trace.final_x = std::move(x);
  trace.final_y = std::move(y);
  trace.oracle_calls = counts;
  return trace;
}

std::int64_t best_iterate(const Trace& trace, BestIterateCriterion criterion) {
  if (trace.records.empty()) throw ConfigError("best_iterate: empty trace");
  auto value = [criterion](const IterateRecord& r) {
    const double other =
        criterion == BestIterateCriterion::MaxOfGradHAndStationarity ? r.grad_h_sq : r.h_val;
    return std::max(other, r.kkt_stationarity);
  };
  const IterateRecord* best = &trace.records.front();
  for (const IterateRecord& r : trace.records) {
    if (value(r) < value(*best)) best = &r;
  }
  return best->k;
}

SmoothnessConstants estimate_constants(const ProblemOracles& oracles, const Vec& x0,
                                       const Vec& y0, double radius, int samples,
                                       std::uint64_t seed) {
  if (samples < 1) throw ConfigError("estimate_constants: samples must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> box(-radius, radius);
  std::normal_distribution<double> normal;
  auto around = [&](const Vec& center) {
    Vec v(center.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = center(i) + box(rng);
    return v;
  };
  auto unit = [&](Eigen::Index size) {
    Vec v(size);
    for (Eigen::Index i = 0; i < size; ++i) v(i) = normal(rng);
    return Vec(v / v.norm());
  };

  double L_f = 0.0, C_f = 0.0, C_g = 0.0, L_yy = 0.0, L_yx = 0.0;
  for (int s = 0; s < samples; ++s) {
    const Vec xa = around(x0), ya = around(y0);
    const Vec xb = around(x0), yb = around(y0);
    const BlockVec ga = oracles.grad_f(xa, ya);
    const BlockVec gb = oracles.grad_f(xb, yb);
    const BlockVec dg{ga.x - gb.x, ga.y - gb.y};
    const BlockVec dz{xa - xb, ya - yb};
    if (dz.norm() > 0.0) L_f = std::max(L_f, dg.norm() / dz.norm());
    C_f = std::max(C_f, ga.norm());
    C_g = std::max(C_g, oracles.grad_y_g(xa, ya).norm());
    L_yy = std::max(L_yy, oracles.hvp_yy(xa, ya, unit(y0.size())).norm());
    L_yx = std::max(L_yx, oracles.hvp_yx(xa, ya, unit(y0.size())).norm());
  }

  SmoothnessConstants c = oracles.constants;
  if (!c.L_f) c.L_f = L_f;
  if (!c.C_f) c.C_f = C_f;
  if (!c.C_g) c.C_g = C_g;
  if (!c.L_yy_g) c.L_yy_g = L_yy;
  if (!c.L_yx_g) c.L_yx_g = L_yx;
  if (!c.L_h) c.L_h = lipschitz_h_bound(*c.C_g, *c.L_yy_g, *c.L_yx_g);
  return c;
}

}  // namespace bipgd
