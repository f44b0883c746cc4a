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

#include "bipgd/problems.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "bipgd/core_qp.hpp"

namespace bipgd {
namespace {

using Rng = std::mt19937_64;

Mat Gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal;
  Mat m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  }
  return m;
}

Vec GaussianVec(Rng& rng, Eigen::Index size) { return Gaussian(rng, size, 1).col(0); }

// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the signs
// of R's diagonal folded into Q.
Mat RandomOrthogonal(Rng& rng, Eigen::Index size) {
  const Mat g = Gaussian(rng, size, size);
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ();
  const Mat& r = qr.matrixQR();
  for (Eigen::Index j = 0; j < size; ++j) {
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  }
  return q;
}

Mat ConditionedMatrix(Rng& rng, int rows, int cols, double max_cond) {
  if (rows <= 0 || cols <= 0) throw ConfigError("conditioned matrix needs positive dimensions");
  if (!(max_cond >= 1.0)) throw ConfigError("max_cond must be at least 1");
  const Mat u = RandomOrthogonal(rng, rows);
  const Mat v = RandomOrthogonal(rng, cols);
  const int r = std::min(rows, cols);
  Vec s(r);
  for (int i = 0; i < r; ++i) {
    const double t = r == 1 ? 1.0 : static_cast<double>(i) / (r - 1);
    s(i) = (1.0 + (max_cond - 1.0) * t) / std::sqrt(max_cond);
  }
  return u.leftCols(r) * s.asDiagonal() * v.leftCols(r).transpose();
}

double SpectralNorm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues()(0);
}

// sin(c'x + d'y) + log(||w||^2 + 1) with w = y + [x; 0] over the common
// prefix of x and y.
struct UpperObjective {
  Vec c;
  Vec d;

  Eigen::Index common(const Vec& x, const Vec& y) const { return std::min(x.size(), y.size()); }

  double value(const Vec& x, const Vec& y) const {
    Vec w = y;
    const Eigen::Index k = common(x, y);
    w.head(k) += x.head(k);
    return std::sin(c.dot(x) + d.dot(y)) + std::log1p(w.squaredNorm());
  }

  BlockVec grad(const Vec& x, const Vec& y) const {
    Vec w = y;
    const Eigen::Index k = common(x, y);
    w.head(k) += x.head(k);
    const double ct = std::cos(c.dot(x) + d.dot(y));
    const Vec gw = (2.0 / (1.0 + w.squaredNorm())) * w;
    BlockVec g{ct * c, ct * d + gw};
    g.x.head(k) += gw.head(k);
    return g;
  }

  // Hessian norm bound: |sin| ||(c, d)||^2 plus 2 for log(1 + ||w||^2),
  // doubled by the coupling of x and y.
  double smoothness() const { return c.squaredNorm() + d.squaredNorm() + 4.0; }
  double gradient_bound() const {
    return std::sqrt(c.squaredNorm() + d.squaredNorm()) + std::sqrt(2.0);
  }
};

Vec Softmax(const Vec& z) {
  const Vec e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

// Rowwise softmax of Z.
Mat SoftmaxRows(const Mat& z) {
  Mat p = (z.colwise() - z.rowwise().maxCoeff()).array().exp();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

Vec RowLogSumExp(const Mat& z) {
  const Vec mx = z.rowwise().maxCoeff();
  return mx.array() + (z.colwise() - mx).array().exp().rowwise().sum().log();
}

double Sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace

Mat make_conditioned_matrix(std::uint64_t seed, int rows, int cols, double max_cond) {
  Rng rng(seed);
  return ConditionedMatrix(rng, rows, cols, max_cond);
}

namespace {

struct SyntheticData {
  Mat H;
  Mat HtH;
  Mat H_inv;
  UpperObjective upper;
};

BenchmarkProblem SyntheticBase(const std::string& name, std::uint64_t seed, int n,
                               std::shared_ptr<const SyntheticData>& out) {
  if (n < 1) throw ConfigError(name + ": n must be at least 1");
  constexpr double kMaxCond = 10.0;
  Rng rng(seed);
  auto data = std::make_shared<SyntheticData>();
  data->H = ConditionedMatrix(rng, n, n, kMaxCond);
  data->HtH = data->H.transpose() * data->H;
  data->H_inv = data->H.inverse();
  data->upper.c = GaussianVec(rng, n);
  data->upper.d = GaussianVec(rng, n);
  out = data;

  BenchmarkProblem p;
  p.name = name;
  p.metadata.seed = seed;
  p.metadata.dim_x = n;
  p.metadata.dim_y = n;
  const Eigen::JacobiSVD<Mat> svd(data->H);
  p.metadata.condition_number = svd.singularValues()(0) / svd.singularValues()(n - 1);
  p.f_lower_bound = -1.0;
  p.oracles.dim_x = n;
  p.oracles.dim_y = n;
  p.oracles.f_eval = [data](const Vec& x, const Vec& y) { return data->upper.value(x, y); };
  p.oracles.grad_f = [data](const Vec& x, const Vec& y) { return data->upper.grad(x, y); };
  p.oracles.constants.L_f = data->upper.smoothness();
  p.oracles.constants.C_f = data->upper.gradient_bound();
  Rng start_rng(seed + 1);
  p.x0 = GaussianVec(start_rng, n);
  p.y0 = Vec::Zero(n);
  return p;
}

}  // namespace

BenchmarkProblem make_sc_synthetic(std::uint64_t seed, int n) {
  std::shared_ptr<const SyntheticData> data;
  BenchmarkProblem p = SyntheticBase("sc_synthetic", seed, n, data);
  p.strongly_convex = true;
  p.oracles.grad_y_g = [data](const Vec& x, const Vec& y) -> Vec {
    return data->H.transpose() * (data->H * y - x);
  };
  p.oracles.hvp_yy = [data](const Vec&, const Vec&, const Vec& v) -> Vec {
    return data->HtH * v;
  };
  p.oracles.hvp_yx = [data](const Vec&, const Vec&, const Vec& v) -> Vec {
    return -(data->H * v);
  };
  p.oracles.g_eval = [data](const Vec& x, const Vec& y) {
    return 0.5 * (data->H * y - x).squaredNorm();
  };
  p.oracles.grad_x_g = [data](const Vec& x, const Vec& y) -> Vec { return x - data->H * y; };

  const double s = SpectralNorm(data->H);
  p.oracles.constants.L_yy_g = s * s;
  p.oracles.constants.L_yx_g = s;
  // grad h = 2 J'J (x, y) with J = [-H', H'H]; ||J||^2 = s^2 + s^4.
  p.oracles.constants.L_h = 2.0 * (s * s + s * s * s * s);

  p.lower_solution = [data](const Vec& x) -> Vec { return data->H_inv * x; };
  p.hypergradient = [data](const Vec& x) -> Vec {
    const Vec y = data->H_inv * x;
    const BlockVec g = data->upper.grad(x, y);
    return g.x + data->H_inv.transpose() * g.y;
  };
  return p;
}

BenchmarkProblem make_nc_synthetic(std::uint64_t seed, int n) {
  std::shared_ptr<const SyntheticData> data;
  BenchmarkProblem p = SyntheticBase("nc_synthetic", seed, n, data);
  p.strongly_convex = false;
  // u = 1/2 ||r||^2, r = Hy - x, q = H'r.
  p.oracles.grad_y_g = [data](const Vec& x, const Vec& y) -> Vec {
    const Vec r = data->H * y - x;
    return -std::sin(0.5 * r.squaredNorm()) * (data->H.transpose() * r);
  };
  p.oracles.hvp_yy = [data](const Vec& x, const Vec& y, const Vec& v) -> Vec {
    const Vec r = data->H * y - x;
    const double u = 0.5 * r.squaredNorm();
    const Vec q = data->H.transpose() * r;
    return -std::cos(u) * q.dot(v) * q - std::sin(u) * (data->HtH * v);
  };
  p.oracles.hvp_yx = [data](const Vec& x, const Vec& y, const Vec& v) -> Vec {
    const Vec r = data->H * y - x;
    const double u = 0.5 * r.squaredNorm();
    const Vec q = data->H.transpose() * r;
    return std::cos(u) * q.dot(v) * r + std::sin(u) * (data->H * v);
  };
  p.oracles.g_eval = [data](const Vec& x, const Vec& y) {
    return std::cos(0.5 * (data->H * y - x).squaredNorm());
  };
  p.oracles.grad_x_g = [data](const Vec& x, const Vec& y) -> Vec {
    const Vec r = data->H * y - x;
    return std::sin(0.5 * r.squaredNorm()) * r;
  };
  p.sample_scale_x = 0.5;
  p.sample_scale_y = 0.5;
  return p;
}

BenchmarkProblem make_coreset(std::uint64_t seed) {
  constexpr int kDimX = 4;
  constexpr int kDimY = 2;
  struct Data {
    Mat A;
    Vec target;
  };
  Rng rng(seed);
  auto data = std::make_shared<Data>();
  data->A = Gaussian(rng, kDimY, kDimX);
  data->target = GaussianVec(rng, kDimY);

  auto jac = [](const Vec& s) -> Mat {
    return Mat(s.asDiagonal()) - s * s.transpose();
  };

  BenchmarkProblem p;
  p.name = "coreset";
  p.metadata.seed = seed;
  p.metadata.dim_x = kDimX;
  p.metadata.dim_y = kDimY;
  p.strongly_convex = true;
  p.f_lower_bound = 0.0;
  ProblemOracles& o = p.oracles;
  o.dim_x = kDimX;
  o.dim_y = kDimY;
  o.f_eval = [data](const Vec&, const Vec& y) { return (y - data->target).squaredNorm(); };
  o.grad_f = [data](const Vec& x, const Vec& y) {
    return BlockVec{Vec::Zero(x.size()), 2.0 * (y - data->target)};
  };
  o.grad_y_g = [data](const Vec& x, const Vec& y) -> Vec {
    return 2.0 * (y - data->A * Softmax(x));
  };
  o.hvp_yy = [](const Vec&, const Vec&, const Vec& v) -> Vec { return 2.0 * v; };
  o.hvp_yx = [data, jac](const Vec& x, const Vec&, const Vec& v) -> Vec {
    return -2.0 * (jac(Softmax(x)) * (data->A.transpose() * v));
  };
  o.g_eval = [data](const Vec& x, const Vec& y) {
    return (y - data->A * Softmax(x)).squaredNorm();
  };
  o.grad_x_g = [data, jac](const Vec& x, const Vec& y) -> Vec {
    const Vec s = Softmax(x);
    return -2.0 * (jac(s) * (data->A.transpose() * (y - data->A * s)));
  };
  o.constants.L_f = 2.0;
  o.constants.L_yy_g = 2.0;
  // ||diag(s) - s s'|| <= 1/2.
  o.constants.L_yx_g = SpectralNorm(data->A);

  p.lower_solution = [data](const Vec& x) -> Vec { return data->A * Softmax(x); };
  p.hypergradient = [data, jac](const Vec& x) -> Vec {
    const Vec s = Softmax(x);
    return 2.0 * (jac(s) * (data->A.transpose() * (data->A * s - data->target)));
  };
  p.x0 = Vec::Zero(kDimX);
  p.y0 = Vec::Zero(kDimY);
  return p;
}

BenchmarkProblem make_dhc(const DhcParams& params) {
  if (!(params.corruption >= 0.0) || !(params.corruption < 1.0)) {
    throw ConfigError("dhc: corruption must lie in [0, 1)");
  }
  if (params.n_features < 1 || params.n_classes < 2 || params.n_train < 1 || params.n_val < 1 ||
      params.n_test < 1) {
    throw ConfigError("dhc: dimensions must be positive and n_classes at least 2");
  }
  if (!(params.regularizer > 0.0)) throw ConfigError("dhc: regularizer must be positive");

  const int d = params.n_features;
  const int C = params.n_classes;
  struct Data {
    int d = 0;
    int C = 0;
    double reg = 0.0;
    Mat A_tr, A_val, A_te;
    Mat Y_tr, Y_val;  // one-hot
    std::vector<int> b_te;
  };
  auto data = std::make_shared<Data>();
  data->d = d;
  data->C = C;
  data->reg = params.regularizer;

  Rng rng(params.seed);
  const Mat means = params.class_separation * Gaussian(rng, d, C);
  std::uniform_int_distribution<int> pick_class(0, C - 1);
  std::normal_distribution<double> normal;
  auto sample = [&](int count, Mat& features, std::vector<int>& labels) {
    features.resize(count, d);
    labels.resize(count);
    for (int i = 0; i < count; ++i) {
      labels[i] = pick_class(rng);
      for (int j = 0; j < d; ++j) features(i, j) = means(j, labels[i]) + normal(rng);
    }
  };
  auto one_hot = [C](const std::vector<int>& labels) {
    Mat y = Mat::Zero(static_cast<Eigen::Index>(labels.size()), C);
    for (std::size_t i = 0; i < labels.size(); ++i) y(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
    return y;
  };
  std::vector<int> b_tr, b_val;
  sample(params.n_train, data->A_tr, b_tr);
  sample(params.n_val, data->A_val, b_val);
  sample(params.n_test, data->A_te, data->b_te);

  // Relabel a corruption fraction of the training set to a different class.
  std::vector<int> order(params.n_train);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const int n_corrupt = static_cast<int>(std::lround(params.corruption * params.n_train));
  std::uniform_int_distribution<int> shift(1, C - 1);
  for (int i = 0; i < n_corrupt; ++i) {
    int& label = b_tr[order[i]];
    label = (label + shift(rng)) % C;
  }
  data->Y_tr = one_hot(b_tr);
  data->Y_val = one_hot(b_val);

  const double n_tr = params.n_train;
  const double n_val = params.n_val;
  auto weights = [](const Vec& x) {
    Vec s(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) s(i) = Sigmoid(x(i));
    return s;
  };
  auto as_matrix = [data](const Vec& y) {
    return Eigen::Map<const Mat>(y.data(), data->d, data->C);
  };
  auto flatten = [](const Mat& m) { return Vec(Eigen::Map<const Vec>(m.data(), m.size())); };
  auto cross_entropy = [](const Mat& z, const Mat& onehot) -> Vec {
    return RowLogSumExp(z) - (z.cwiseProduct(onehot)).rowwise().sum();
  };

  BenchmarkProblem p;
  p.name = "dhc";
  p.metadata.seed = params.seed;
  p.metadata.dim_x = params.n_train;
  p.metadata.dim_y = d * C;
  p.metadata.corruption_rate = params.corruption;
  p.metadata.extra["regularizer"] = params.regularizer;
  p.metadata.extra["n_features"] = d;
  p.metadata.extra["n_classes"] = C;
  p.metadata.extra["n_train"] = params.n_train;
  p.metadata.extra["n_val"] = params.n_val;
  p.metadata.extra["n_test"] = params.n_test;
  p.metadata.extra["class_separation"] = params.class_separation;
  p.metadata.extra["n_corrupted"] = n_corrupt;
  p.strongly_convex = true;
  p.f_lower_bound = 0.0;

  ProblemOracles& o = p.oracles;
  o.dim_x = params.n_train;
  o.dim_y = d * C;
  o.f_eval = [=](const Vec&, const Vec& y) {
    return cross_entropy(data->A_val * as_matrix(y), data->Y_val).mean();
  };
  o.grad_f = [=](const Vec& x, const Vec& y) {
    const Mat p_val = SoftmaxRows(data->A_val * as_matrix(y));
    const Mat g = data->A_val.transpose() * (p_val - data->Y_val) / n_val;
    return BlockVec{Vec::Zero(x.size()), flatten(g)};
  };
  o.grad_y_g = [=](const Vec& x, const Vec& y) -> Vec {
    const auto w = as_matrix(y);
    const Mat r = weights(x).asDiagonal() * (SoftmaxRows(data->A_tr * w) - data->Y_tr);
    return flatten(data->A_tr.transpose() * r / n_tr + 2.0 * data->reg * w);
  };
  o.hvp_yy = [=](const Vec& x, const Vec& y, const Vec& v) -> Vec {
    const Mat pr = SoftmaxRows(data->A_tr * as_matrix(y));
    const Mat mv = data->A_tr * as_matrix(v);
    Mat q = pr.cwiseProduct(mv);
    const Vec inner = q.rowwise().sum();
    q -= pr.cwiseProduct(inner.replicate(1, data->C));
    q = weights(x).asDiagonal() * q;
    return flatten(data->A_tr.transpose() * q / n_tr + 2.0 * data->reg * as_matrix(v));
  };
  o.hvp_yx = [=](const Vec& x, const Vec& y, const Vec& v) -> Vec {
    const Mat r = SoftmaxRows(data->A_tr * as_matrix(y)) - data->Y_tr;
    const Mat mv = data->A_tr * as_matrix(v);
    const Vec s = weights(x);
    const Vec ds = s.array() * (1.0 - s.array());
    return ds.cwiseProduct(r.cwiseProduct(mv).rowwise().sum()) / n_tr;
  };
  o.g_eval = [=](const Vec& x, const Vec& y) {
    const auto w = as_matrix(y);
    const Vec ce = cross_entropy(data->A_tr * w, data->Y_tr);
    return weights(x).dot(ce) / n_tr + data->reg * w.squaredNorm();
  };
  o.grad_x_g = [=](const Vec& x, const Vec& y) -> Vec {
    const Vec ce = cross_entropy(data->A_tr * as_matrix(y), data->Y_tr);
    const Vec s = weights(x);
    return (s.array() * (1.0 - s.array()) * ce.array()).matrix() / n_tr;
  };
  // The softmax Hessian diag(p) - pp' has norm at most 1/2.
  const double val_norm = SpectralNorm(data->A_val);
  const double tr_norm = SpectralNorm(data->A_tr);
  o.constants.L_f = 0.5 * val_norm * val_norm / n_val;
  o.constants.L_yy_g = 0.5 * tr_norm * tr_norm / n_tr + 2.0 * params.regularizer;
  // Column i of d(grad_y g)/dx is sigma'(x_i) a_i r_i' / n with sigma' <= 1/4 and
  // ||r_i|| <= sqrt(2); bound the spectral norm by the Frobenius norm.
  o.constants.L_yx_g = std::sqrt(2.0) * data->A_tr.norm() / (4.0 * n_tr);

  p.test_accuracy = [data, as_matrix](const Vec& y) {
    const Mat z = data->A_te * as_matrix(y);
    int correct = 0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      Eigen::Index arg = 0;
      z.row(i).maxCoeff(&arg);
      if (arg == data->b_te[static_cast<std::size_t>(i)]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(z.rows());
  };
  const ProblemOracles lower = o;
  p.lower_solution = [lower](const Vec& x) {
    return solve_lower_level(lower, x, Vec::Zero(lower.dim_y), 1e-20, 200000);
  };
  p.x0 = Vec::Zero(params.n_train);
  p.y0 = Vec::Zero(d * C);
  p.sample_scale_x = 1.0;
  p.sample_scale_y = 0.1;
  return p;
}

BenchmarkProblem make_regularity_example(std::uint64_t seed, int p_rows, int m, int n) {
  if (p_rows < 1 || m < 1 || n < 1) throw ConfigError("regularity: dimensions must be positive");
  struct Data {
    Mat A, B, AtA, AtB;
    UpperObjective upper;
  };
  Rng rng(seed);
  auto data = std::make_shared<Data>();
  data->A = Gaussian(rng, p_rows, m);
  data->B = Gaussian(rng, p_rows, n);
  data->AtA = data->A.transpose() * data->A;
  data->AtB = data->A.transpose() * data->B;
  data->upper.c = GaussianVec(rng, n);
  data->upper.d = GaussianVec(rng, m);

  BenchmarkProblem p;
  p.name = "regularity";
  p.metadata.seed = seed;
  p.metadata.dim_x = n;
  p.metadata.dim_y = m;
  p.metadata.extra["p"] = p_rows;
  p.f_lower_bound = -1.0;

  const Eigen::SelfAdjointEigenSolver<Mat> eig(data->AtA);
  const Vec ev = eig.eigenvalues();
  const double top = ev.maxCoeff();
  double sigma_plus_min = top;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > 1e-10 * top) sigma_plus_min = std::min(sigma_plus_min, ev(i));
  }
  p.metadata.extra["sigma_plus_min"] = sigma_plus_min;
  p.metadata.extra["regularity_c"] = 1.0 / (2.0 * sigma_plus_min);
  p.strongly_convex = ev.minCoeff() > 1e-10 * top;

  ProblemOracles& o = p.oracles;
  o.dim_x = n;
  o.dim_y = m;
  o.f_eval = [data](const Vec& x, const Vec& y) { return data->upper.value(x, y); };
  o.grad_f = [data](const Vec& x, const Vec& y) { return data->upper.grad(x, y); };
  o.grad_y_g = [data](const Vec& x, const Vec& y) -> Vec {
    return data->A.transpose() * (data->A * y - data->B * x);
  };
  o.hvp_yy = [data](const Vec&, const Vec&, const Vec& v) -> Vec { return data->AtA * v; };
  o.hvp_yx = [data](const Vec&, const Vec&, const Vec& v) -> Vec {
    return -(data->AtB.transpose() * v);
  };
  o.g_eval = [data](const Vec& x, const Vec& y) {
    return 0.5 * (data->A * y - data->B * x).squaredNorm();
  };
  o.grad_x_g = [data](const Vec& x, const Vec& y) -> Vec {
    return -(data->B.transpose() * (data->A * y - data->B * x));
  };
  o.constants.L_f = data->upper.smoothness();
  o.constants.C_f = data->upper.gradient_bound();
  o.constants.L_yy_g = top;
  o.constants.L_yx_g = SpectralNorm(data->AtB);
  // ||J||^2 for J = [-A'B, A'A].
  Mat jac(m, n + m);
  jac << -data->AtB, data->AtA;
  const double jn = SpectralNorm(jac);
  o.constants.L_h = 2.0 * jn * jn;

  auto cod = std::make_shared<const Eigen::CompleteOrthogonalDecomposition<Mat>>(data->A);
  p.lower_solution = [data, cod](const Vec& x) -> Vec { return cod->solve(data->B * x); };
  if (p.strongly_convex) {
    auto ata_inv = std::make_shared<const Mat>(data->AtA.inverse());
    p.hypergradient = [data, ata_inv](const Vec& x) -> Vec {
      const Vec y = *ata_inv * (data->AtB * x);
      const BlockVec g = data->upper.grad(x, y);
      return g.x + data->AtB.transpose() * (*ata_inv * g.y);
    };
  }
  Rng start_rng(seed + 1);
  p.x0 = GaussianVec(start_rng, n);
  p.y0 = Vec::Zero(m);
  return p;
}

BenchmarkProblem make_quadratic_toy() {
  BenchmarkProblem p;
  p.name = "quadratic_toy";
  p.metadata.dim_x = 1;
  p.metadata.dim_y = 1;
  p.strongly_convex = true;
  p.f_lower_bound = 0.0;
  ProblemOracles& o = p.oracles;
  o.dim_x = 1;
  o.dim_y = 1;
  o.f_eval = [](const Vec& x, const Vec& y) { return 0.5 * (x.squaredNorm() + y.squaredNorm()); };
  o.grad_f = [](const Vec& x, const Vec& y) { return BlockVec{x, y}; };
  o.grad_y_g = [](const Vec& x, const Vec& y) -> Vec { return y - x; };
  o.hvp_yy = [](const Vec&, const Vec&, const Vec& v) -> Vec { return v; };
  o.hvp_yx = [](const Vec&, const Vec&, const Vec& v) -> Vec { return -v; };
  o.g_eval = [](const Vec& x, const Vec& y) { return 0.5 * (y - x).squaredNorm(); };
  o.grad_x_g = [](const Vec& x, const Vec& y) -> Vec { return x - y; };
  o.constants.L_f = 1.0;
  o.constants.C_f = std::nullopt;
  o.constants.L_yy_g = 1.0;
  o.constants.L_yx_g = 1.0;
  o.constants.L_h = 4.0;
  p.lower_solution = [](const Vec& x) -> Vec { return x; };
  p.hypergradient = [](const Vec& x) -> Vec { return 2.0 * x; };
  p.x0 = Vec::Ones(1);
  p.y0 = Vec::Zero(1);
  return p;
}

Vec solve_lower_level(const ProblemOracles& oracles, const Vec& x, const Vec& y_init, double tol,
                      std::int64_t max_iters) {
  if (!oracles.constants.L_yy_g || !(*oracles.constants.L_yy_g > 0.0)) {
    throw ConfigError("solve_lower_level needs a positive L_yy_g");
  }
  const double step = 1.0 / *oracles.constants.L_yy_g;
  Vec y = y_init;
  Vec z = y_init;
  double t = 1.0;
  if (oracles.grad_y_g(x, y).squaredNorm() <= tol) return y;
  for (std::int64_t it = 0; it < max_iters; ++it) {
    const Vec gz = oracles.grad_y_g(x, z);
    Vec y_next = z - step * gz;
    if (oracles.grad_y_g(x, y_next).squaredNorm() <= tol) return y_next;
    if (gz.dot(y_next - y) > 0.0) {
      // Momentum points uphill: restart.
      t = 1.0;
      z = y_next;
    } else {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      z = y_next + ((t - 1.0) / t_next) * (y_next - y);
      t = t_next;
    }
    y = std::move(y_next);
  }
  return y;
}

namespace {

std::vector<Vec> Probes(Rng& rng, Eigen::Index size) {
  constexpr Eigen::Index kCoordinateLimit = 64;
  constexpr int kRandomProbes = 8;
  std::vector<Vec> probes;
  if (size <= kCoordinateLimit) {
    for (Eigen::Index i = 0; i < size; ++i) probes.push_back(Vec::Unit(size, i));
  } else {
    for (int i = 0; i < kRandomProbes; ++i) {
      Vec v = GaussianVec(rng, size);
      probes.push_back(v / v.norm());
    }
  }
  return probes;
}

double RelError(const Vec& fd, const Vec& an) {
  return (fd - an).norm() / std::max(1.0, an.norm());
}

}  // namespace

FdReport finite_diff_check(const BenchmarkProblem& problem, const Vec& x, const Vec& y,
                           double step, std::uint64_t probe_seed) {
  if (!(step > 0.0)) throw ConfigError("finite_diff_check: step must be positive");
  const ProblemOracles& o = problem.oracles;
  const Eigen::Index n = x.size();
  const Eigen::Index m = y.size();
  const double scale = std::max({1.0, x.cwiseAbs().maxCoeff(), y.cwiseAbs().maxCoeff()});
  const double eps = step * scale;

  Rng rng(probe_seed);
  std::vector<Vec> joint = Probes(rng, n + m);
  const std::vector<Vec> xprobes = Probes(rng, n);
  const std::vector<Vec> yprobes = Probes(rng, m);

  FdReport report;
  auto add = [&report](std::string name, double err) {
    report.max_rel_error = std::max(report.max_rel_error, err);
    report.entries.push_back({std::move(name), err});
  };

  // Directional derivatives of a scalar function along joint probes.
  auto scalar_check = [&](const std::function<double(const Vec&, const Vec&)>& fn,
                          const BlockVec& grad) {
    const auto count = static_cast<Eigen::Index>(joint.size());
    Vec fd(count), an(count);
    for (Eigen::Index i = 0; i < count; ++i) {
      const Vec dx = joint[i].head(n), dy = joint[i].tail(m);
      fd(i) = (fn(x + eps * dx, y + eps * dy) - fn(x - eps * dx, y - eps * dy)) / (2.0 * eps);
      an(i) = grad.x.dot(dx) + grad.y.dot(dy);
    }
    return RelError(fd, an);
  };

  add("grad_f", scalar_check(o.f_eval, o.grad_f(x, y)));
  const Vec gy = o.grad_y_g(x, y);
  if (o.g_eval) {
    const Vec gx = o.grad_x_g ? o.grad_x_g(x, y) : Vec::Zero(n);
    Vec fd(static_cast<Eigen::Index>(yprobes.size())), an(fd.size());
    for (Eigen::Index i = 0; i < fd.size(); ++i) {
      const Vec& v = yprobes[i];
      fd(i) = (o.g_eval(x, y + eps * v) - o.g_eval(x, y - eps * v)) / (2.0 * eps);
      an(i) = gy.dot(v);
    }
    add("grad_y_g", RelError(fd, an));
    if (o.grad_x_g) {
      Vec fdx(static_cast<Eigen::Index>(xprobes.size())), anx(fdx.size());
      for (Eigen::Index i = 0; i < fdx.size(); ++i) {
        const Vec& d = xprobes[i];
        fdx(i) = (o.g_eval(x + eps * d, y) - o.g_eval(x - eps * d, y)) / (2.0 * eps);
        anx(i) = gx.dot(d);
      }
      add("grad_x_g", RelError(fdx, anx));
    }
  }
  add("grad_h", scalar_check([&o](const Vec& a, const Vec& b) { return eval_h(o, a, b); },
                             grad_h(o, x, y)));

  double hvp_yy_err = 0.0;
  for (const Vec& v : yprobes) {
    const Vec fd = (o.grad_y_g(x, y + eps * v) - o.grad_y_g(x, y - eps * v)) / (2.0 * eps);
    hvp_yy_err = std::max(hvp_yy_err, RelError(fd, o.hvp_yy(x, y, v)));
  }
  add("hvp_yy", hvp_yy_err);

  Vec w = GaussianVec(rng, m);
  w /= w.norm();
  const Vec jw = o.hvp_yx(x, y, w);
  Vec fd(static_cast<Eigen::Index>(xprobes.size())), an(fd.size());
  for (Eigen::Index i = 0; i < fd.size(); ++i) {
    const Vec& d = xprobes[i];
    fd(i) = w.dot(o.grad_y_g(x + eps * d, y) - o.grad_y_g(x - eps * d, y)) / (2.0 * eps);
    an(i) = d.dot(jw);
  }
  add("hvp_yx", RelError(fd, an));
  return report;
}

double hvp_symmetry_error(const ProblemOracles& oracles, const Vec& x, const Vec& y,
                          std::uint64_t seed, int probes) {
  Rng rng(seed);
  double worst = 0.0;
  for (int i = 0; i < probes; ++i) {
    Vec u = GaussianVec(rng, y.size());
    Vec v = GaussianVec(rng, y.size());
    u /= u.norm();
    v /= v.norm();
    const double uv = u.dot(oracles.hvp_yy(x, y, v));
    const double vu = v.dot(oracles.hvp_yy(x, y, u));
    worst = std::max(worst, std::abs(uv - vu));
  }
  return worst;
}

std::pair<Vec, Vec> sample_point(const BenchmarkProblem& problem, std::uint64_t seed) {
  Rng rng(seed);
  Vec x = problem.x0 + problem.sample_scale_x * GaussianVec(rng, problem.x0.size());
  Vec y = problem.y0 + problem.sample_scale_y * GaussianVec(rng, problem.y0.size());
  return {std::move(x), std::move(y)};
}

}  // namespace bipgd
