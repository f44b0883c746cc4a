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

#include "bipgd/core_qp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/LU>

namespace bipgd {

ProblemOracles with_call_counter(const ProblemOracles& oracles, OracleCounts& counts) {
  ProblemOracles counted = oracles;
  OracleCounts* c = &counts;
  counted.grad_f = [inner = oracles.grad_f, c](const Vec& x, const Vec& y) {
    ++c->grad_f;
    return inner(x, y);
  };
  counted.grad_y_g = [inner = oracles.grad_y_g, c](const Vec& x, const Vec& y) {
    ++c->grad_g;
    return inner(x, y);
  };
  if (oracles.grad_x_g) {
    counted.grad_x_g = [inner = oracles.grad_x_g, c](const Vec& x, const Vec& y) {
      ++c->grad_g;
      return inner(x, y);
    };
  }
  counted.hvp_yx = [inner = oracles.hvp_yx, c](const Vec& x, const Vec& y, const Vec& v) {
    ++c->hvp;
    return inner(x, y, v);
  };
  counted.hvp_yy = [inner = oracles.hvp_yy, c](const Vec& x, const Vec& y, const Vec& v) {
    ++c->hvp;
    return inner(x, y, v);
  };
  return counted;
}

namespace {

[[noreturn]] void ThrowNonFinite(const char* what, const Vec& x, const Vec& y) {
  std::ostringstream msg;
  msg << what << " returned a non-finite value at x = [" << x.transpose() << "], y = ["
      << y.transpose() << "]";
  throw EvaluationError(msg.str(), x, y);
}

}  // namespace

double eval_h(const ProblemOracles& oracles, const Vec& x, const Vec& y) {
  const Vec gy = oracles.grad_y_g(x, y);
  if (!gy.allFinite()) ThrowNonFinite("grad_y_g", x, y);
  return gy.squaredNorm();
}

BlockVec grad_h(const ProblemOracles& oracles, const Vec& x, const Vec& y) {
  const Vec gy = oracles.grad_y_g(x, y);
  if (!gy.allFinite()) ThrowNonFinite("grad_y_g", x, y);
  return grad_h_from(oracles, x, y, gy);
}

BlockVec grad_h_from(const ProblemOracles& oracles, const Vec& x, const Vec& y,
                     const Vec& grad_y_g) {
  BlockVec g{2.0 * oracles.hvp_yx(x, y, grad_y_g), 2.0 * oracles.hvp_yy(x, y, grad_y_g)};
  if (!g.allFinite()) ThrowNonFinite("Hessian-vector product", x, y);
  return g;
}

double rho_regular(const BlockVec& grad_h) { return grad_h.squaredNorm(); }

double rho_general(const BlockVec& grad_h, double h0) {
  return grad_h.norm() * std::sqrt(h0);
}

double multiplier(const BlockVec& grad_f, const BlockVec& grad_h, double rho, double alpha,
                  double denom_tol) {
  const double denom = grad_h.squaredNorm();
  if (denom <= denom_tol * std::max(1.0, grad_f.squaredNorm())) return 0.0;
  const double numer = -grad_h.dot(grad_f) + alpha * rho;
  return std::max(0.0, numer) / denom;
}

BlockVec direction(const BlockVec& grad_f, const BlockVec& grad_h, double lambda) {
  return {-(grad_f.x + lambda * grad_h.x), -(grad_f.y + lambda * grad_h.y)};
}

StepResult solve_step(const BlockVec& grad_f, const BlockVec& grad_h, double rho, double alpha,
                      double denom_tol) {
  StepResult step;
  step.rho = rho;
  step.lambda = multiplier(grad_f, grad_h, rho, alpha, denom_tol);
  step.delta = direction(grad_f, grad_h, step.lambda);
  step.grad_h = grad_h;
  step.constraint_slack = grad_h.dot(step.delta) + alpha * rho;
  return step;
}

QpSolution qp_brute_oracle(const BlockVec& grad_f, const BlockVec& grad_h, double rho,
                           double alpha) {
  const Eigen::Index n = grad_f.x.size();
  const Eigen::Index m = grad_f.y.size();
  const Eigen::Index dim = n + m;
  Vec g(dim), a(dim);
  g << grad_f.x, grad_f.y;
  a << grad_h.x, grad_h.y;
  const double rhs = -alpha * rho;

  auto split = [n, m](const Vec& z) { return BlockVec{z.head(n), z.tail(m)}; };

  // Active set {}: the unconstrained minimizer, if it is feasible.
  const Vec free_step = -g;
  if (a.dot(free_step) <= rhs || a.squaredNorm() == 0.0) {
    return {split(free_step), 0.0};
  }

  // Active set {0}: stationarity plus the constraint held with equality,
  //   [ I   a ] [delta ]   [ -g  ]
  //   [ a'  0 ] [lambda] = [ rhs ].
  Mat kkt = Mat::Zero(dim + 1, dim + 1);
  kkt.topLeftCorner(dim, dim).setIdentity();
  kkt.topRightCorner(dim, 1) = a;
  kkt.bottomLeftCorner(1, dim) = a.transpose();
  Vec b(dim + 1);
  b << -g, rhs;
  const Vec sol = kkt.fullPivLu().solve(b);
  return {split(sol.head(dim)), std::max(0.0, sol(dim))};
}

}  // namespace bipgd
