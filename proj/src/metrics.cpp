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

#include "bipgd/metrics.hpp"

#include <cmath>

#include "bipgd/core_qp.hpp"

namespace bipgd {

KktResidual kkt_residual(const ProblemOracles& oracles, const Vec& x, const Vec& y,
                         double lambda) {
  if (!(lambda >= 0.0)) throw ConfigError("kkt_residual: lambda must be nonnegative");
  const BlockVec gf = oracles.grad_f(x, y);
  const Vec gy = oracles.grad_y_g(x, y);
  const BlockVec gh = grad_h_from(oracles, x, y, gy);
  // Same expression shape as direction() so the two agree bit for bit.
  const BlockVec r{gf.x + lambda * gh.x, gf.y + lambda * gh.y};
  return {gy.squaredNorm(), r.squaredNorm()};
}

Vec lower_kkt_map(double lambda, const Vec& grad_y_g) {
  if (!(lambda >= 0.0)) throw ConfigError("lower_kkt_map: lambda must be nonnegative");
  return (2.0 * lambda) * grad_y_g;
}

LowerKktResidual lower_kkt_residual(const ProblemOracles& oracles, const Vec& x, const Vec& y,
                                    double lambda) {
  const BlockVec gf = oracles.grad_f(x, y);
  const Vec gy = oracles.grad_y_g(x, y);
  const Vec nu = lower_kkt_map(lambda, gy);
  LowerKktResidual r;
  r.feasibility = gy.squaredNorm();
  r.stationarity_x = (gf.x + oracles.hvp_yx(x, y, nu)).squaredNorm();
  r.stationarity_y = (gf.y + oracles.hvp_yy(x, y, nu)).squaredNorm();
  return r;
}

double lipschitz_h_bound(double C_g, double L_yy_g, double L_yx_g) {
  if (C_g < 0 || L_yy_g < 0 || L_yx_g < 0) {
    throw ConfigError("lipschitz_h_bound: constants must be nonnegative");
  }
  return 2.0 * C_g * (L_yy_g + L_yx_g);
}

double rate_slope(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 2) throw ConfigError("rate_slope: need at least two points");
  double mean_u = 0.0, mean_v = 0.0;
  for (const auto& [k, value] : points) {
    if (!(k > 0.0) || !(value > 0.0)) {
      throw ConfigError("rate_slope: K and value must be positive");
    }
    mean_u += std::log(k);
    mean_v += std::log(value);
  }
  const double count = static_cast<double>(points.size());
  mean_u /= count;
  mean_v /= count;
  double suu = 0.0, suv = 0.0;
  for (const auto& [k, value] : points) {
    const double du = std::log(k) - mean_u;
    suu += du * du;
    suv += du * (std::log(value) - mean_v);
  }
  if (suu == 0.0) throw ConfigError("rate_slope: all K values are equal");
  return suv / suu;
}

}  // namespace bipgd
