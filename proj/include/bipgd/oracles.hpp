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

#ifndef BIPGD_ORACLES_HPP_
#define BIPGD_ORACLES_HPP_

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace bipgd {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// A vector split into its upper-level (x) and lower-level (y) blocks.
struct BlockVec {
  Vec x;
  Vec y;

  double squaredNorm() const { return x.squaredNorm() + y.squaredNorm(); }
  double norm() const { return std::sqrt(squaredNorm()); }
  double dot(const BlockVec& other) const { return x.dot(other.x) + y.dot(other.y); }
  bool allFinite() const { return x.allFinite() && y.allFinite(); }
};

// Smoothness and boundedness constants. Any of them may be unknown.
//   L_f     Lipschitz constant of grad f (max over the x and y blocks)
//   L_h     Lipschitz constant of grad h (smoothness of h)
//   C_f     bound on ||grad f||
//   C_g     bound on ||grad_y g||
//   L_yy_g  Lipschitz constant of grad_y g in y
//   L_yx_g  Lipschitz constant of grad_y g in x
struct SmoothnessConstants {
  std::optional<double> L_f;
  std::optional<double> L_h;
  std::optional<double> C_f;
  std::optional<double> C_g;
  std::optional<double> L_yy_g;
  std::optional<double> L_yx_g;
};

// Evaluators for the upper objective f and the lower objective g.
//
// hvp_yx(x, y, v) returns (d grad_y g / dx)^T v, an n-vector.
// hvp_yy(x, y, v) returns (d grad_y g / dy)^T v, an m-vector.
//
// g_eval and grad_x_g are optional. Finite-difference validation and the
// warm start's backtracking use g_eval; the BOME baseline needs grad_x_g.
struct ProblemOracles {
  int dim_x = 0;
  int dim_y = 0;
  std::function<double(const Vec& x, const Vec& y)> f_eval;
  std::function<BlockVec(const Vec& x, const Vec& y)> grad_f;
  std::function<Vec(const Vec& x, const Vec& y)> grad_y_g;
  std::function<Vec(const Vec& x, const Vec& y, const Vec& v)> hvp_yx;
  std::function<Vec(const Vec& x, const Vec& y, const Vec& v)> hvp_yy;
  std::function<double(const Vec& x, const Vec& y)> g_eval;
  std::function<Vec(const Vec& x, const Vec& y)> grad_x_g;
  SmoothnessConstants constants;
};

// Per-kind oracle call counters. grad_g covers grad_y_g and grad_x_g;
// hvp covers both Hessian-vector products.
struct OracleCounts {
  std::uint64_t grad_f = 0;
  std::uint64_t grad_g = 0;
  std::uint64_t hvp = 0;

  std::uint64_t total() const { return grad_f + grad_g + hvp; }
};

// Returns a copy of `oracles` whose gradient and HVP evaluators increment
// `counts` on every call. `counts` must outlive the returned bundle.
ProblemOracles with_call_counter(const ProblemOracles& oracles, OracleCounts& counts);

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An oracle produced a non-finite value.
class EvaluationError : public Error {
 public:
  EvaluationError(const std::string& what, Vec x, Vec y)
      : Error(what), x_(std::move(x)), y_(std::move(y)) {}
  const Vec& x() const { return x_; }
  const Vec& y() const { return y_; }

 private:
  Vec x_;
  Vec y_;
};

// Invalid configuration or violated precondition.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace bipgd

#endif  // BIPGD_ORACLES_HPP_
