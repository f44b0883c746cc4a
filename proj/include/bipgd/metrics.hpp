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

#ifndef BIPGD_METRICS_HPP_
#define BIPGD_METRICS_HPP_

#include <utility>
#include <vector>

#include "bipgd/oracles.hpp"

namespace bipgd {

struct KktResidual {
  double h = 0.0;
  // ||grad f + lambda grad h||^2
  double stationarity = 0.0;
};

KktResidual kkt_residual(const ProblemOracles& oracles, const Vec& x, const Vec& y,
                         double lambda);

// Multiplier of the original formulation with constraint grad_y g = 0,
// nu = 2 lambda grad_y g. The factor 2 matches grad h = 2 J' grad_y g, so
// that grad f + lambda grad h = grad f + J' nu.
Vec lower_kkt_map(double lambda, const Vec& grad_y_g);

// The three residuals of the original formulation at (x, y, nu):
// ||grad_y g||^2, ||grad_x f + hvp_yx(nu)||^2 and ||grad_y f + hvp_yy(nu)||^2.
struct LowerKktResidual {
  double feasibility = 0.0;
  double stationarity_x = 0.0;
  double stationarity_y = 0.0;
};

LowerKktResidual lower_kkt_residual(const ProblemOracles& oracles, const Vec& x, const Vec& y,
                                    double lambda);

// Lipschitz constant of h = ||grad_y g||^2 from bounds on grad_y g:
// 2 C_g (L_yy + L_yx).
double lipschitz_h_bound(double C_g, double L_yy_g, double L_yx_g);

// Least-squares slope of log(value) against log(K). Needs at least two
// points, all coordinates positive.
double rate_slope(const std::vector<std::pair<double, double>>& points);

}  // namespace bipgd

#endif  // BIPGD_METRICS_HPP_
