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

#ifndef BIPGD_CORE_QP_HPP_
#define BIPGD_CORE_QP_HPP_

#include "bipgd/oracles.hpp"

namespace bipgd {

inline constexpr double kDefaultDenomTol = 1e-14;

// h(x, y) = ||grad_y g(x, y)||^2. Throws EvaluationError on non-finite output.
double eval_h(const ProblemOracles& oracles, const Vec& x, const Vec& y);

// Exact gradient of h: (2 hvp_yx(grad_y g), 2 hvp_yy(grad_y g)).
BlockVec grad_h(const ProblemOracles& oracles, const Vec& x, const Vec& y);

// Same as grad_h, reusing an already evaluated grad_y g(x, y).
BlockVec grad_h_from(const ProblemOracles& oracles, const Vec& x, const Vec& y,
                     const Vec& grad_y_g);

// rho = ||grad h||^2.
double rho_regular(const BlockVec& grad_h);

// rho = ||grad h|| * sqrt(h0), with h0 the constraint value at the initial point.
double rho_general(const BlockVec& grad_h, double h0);

// Dual solution of the step subproblem
//
//   min  1/2 ||dx + grad_x f||^2 + 1/2 ||dy + grad_y f||^2
//   s.t. grad_x h' dx + grad_y h' dy + alpha rho <= 0,
//
// lambda = [-grad h' grad f + alpha rho]_+ / ||grad h||^2. Returns 0 when
// ||grad h||^2 <= denom_tol * max(1, ||grad f||^2).
double multiplier(const BlockVec& grad_f, const BlockVec& grad_h, double rho, double alpha,
                  double denom_tol = kDefaultDenomTol);

// Primal solution given the multiplier: -(grad f + lambda grad h).
BlockVec direction(const BlockVec& grad_f, const BlockVec& grad_h, double lambda);

struct StepResult {
  double lambda = 0.0;
  BlockVec delta;
  BlockVec grad_h;
  double rho = 0.0;
  // grad h' delta + alpha rho; nonpositive up to rounding.
  double constraint_slack = 0.0;
};

StepResult solve_step(const BlockVec& grad_f, const BlockVec& grad_h, double rho, double alpha,
                      double denom_tol = kDefaultDenomTol);

struct QpSolution {
  BlockVec delta;
  double lambda = 0.0;
};

// Reference solver for the step subproblem, used for testing. Enumerates
// both active sets and solves the dense KKT system of the active one with
// an LU factorization; it does not go through multiplier()/direction().
QpSolution qp_brute_oracle(const BlockVec& grad_f, const BlockVec& grad_h, double rho,
                           double alpha);

}  // namespace bipgd

#endif  // BIPGD_CORE_QP_HPP_
