// Copyright 2026 The SSCS Authors.
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

// Scalar/vector primitives shared by every objective: normalization, cosine
// similarity, max-subtracted softmax and log-sum-exp, and the central
// difference gradient oracle used to verify hand-written backward passes.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "sscs/errors.hpp"

namespace sscs {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// A discrete distribution: non-negative entries summing to one.
struct ProbabilityVec {
  Vec values;

  Eigen::Index size() const { return values.size(); }
  double operator[](Eigen::Index i) const { return values[i]; }
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::vector<double> per_coordinate_errors;
  double step_size = 0.0;
};

inline bool all_finite(const Eigen::Ref<const Mat>& m) { return m.allFinite(); }

inline void require_finite(const Eigen::Ref<const Mat>& m, const std::string& what) {
  if (!m.allFinite()) throw NumericError("non-finite values in " + what);
}

inline Vec l2_normalize(const Vec& v) {
  const double n = v.norm();
  if (!(n > 0.0)) throw DegenerateInputError("l2_normalize: zero-norm vector");
  return v / n;
}

// Backward of y = v / |v| given dL/dy.
inline Vec l2_normalize_backward(const Vec& v, const Vec& grad_out) {
  const double n = v.norm();
  const Vec y = v / n;
  return (grad_out - y * y.dot(grad_out)) / n;
}

inline double cosine_similarity(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw ParameterError("cosine_similarity: dimension mismatch");
  const double na = a.norm();
  const double nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) {
    throw DegenerateInputError("cosine_similarity: zero-norm vector");
  }
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

// Gradients of cos(a, b) with respect to a and b.
struct CosineGrad {
  Vec da;
  Vec db;
};

inline CosineGrad cosine_similarity_backward(const Vec& a, const Vec& b, double grad_out) {
  const double na = a.norm();
  const double nb = b.norm();
  const double c = a.dot(b) / (na * nb);
  CosineGrad g;
  g.da = grad_out * (b / (na * nb) - c * a / (na * na));
  g.db = grad_out * (a / (na * nb) - c * b / (nb * nb));
  return g;
}

inline double log_sum_exp(const Vec& logits) {
  if (logits.size() == 0) throw ParameterError("log_sum_exp: empty input");
  const double m = logits.maxCoeff();
  if (!std::isfinite(m)) throw NumericError("log_sum_exp: non-finite input");
  return m + std::log((logits.array() - m).exp().sum());
}

inline ProbabilityVec stable_softmax(const Vec& logits, double tau = 1.0) {
  if (!(tau > 0.0)) throw ParameterError("stable_softmax: temperature must be positive");
  if (logits.size() == 0) throw ParameterError("stable_softmax: empty input");
  const Vec scaled = logits / tau;
  const double m = scaled.maxCoeff();
  if (!std::isfinite(m)) throw NumericError("stable_softmax: non-finite input");
  Vec e = (scaled.array() - m).exp().matrix();
  return ProbabilityVec{e / e.sum()};
}

// Backward of p = softmax(z / tau): returns dL/dz given dL/dp.
inline Vec softmax_backward(const ProbabilityVec& p, const Vec& grad_out, double tau = 1.0) {
  const double inner = p.values.dot(grad_out);
  return (p.values.array() * (grad_out.array() - inner)).matrix() / tau;
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(sigmoid(x)) without overflow.
inline double log_sigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

using ScalarFn = std::function<double(const Vec&)>;

inline Vec finite_diff_gradient(const ScalarFn& f, const Vec& x, double h = 1e-5) {
  if (!(h > 0.0)) throw ParameterError("finite_diff_gradient: step must be positive");
  Vec grad(x.size());
  Vec probe = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    probe[k] = x[k] + h;
    const double fp = f(probe);
    probe[k] = x[k] - h;
    const double fm = f(probe);
    probe[k] = x[k];
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("finite_diff_gradient: non-finite evaluation at coordinate " +
                         std::to_string(k));
    }
    grad[k] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

// Per-coordinate |a - n| / max(|a|, |n|, floor). The floor keeps coordinates
// whose true gradient is ~0 from turning round-off into huge ratios.
inline constexpr double kGradCheckFloor = 1e-4;

inline GradCheckReport compare_gradients(const Vec& analytic, const Vec& numeric, double step,
                                         double floor = kGradCheckFloor) {
  if (analytic.size() != numeric.size()) {
    throw ParameterError("compare_gradients: size mismatch");
  }
  GradCheckReport r;
  r.step_size = step;
  r.per_coordinate_errors.resize(static_cast<std::size_t>(analytic.size()));
  for (Eigen::Index k = 0; k < analytic.size(); ++k) {
    const double a = analytic[k];
    const double n = numeric[k];
    const double denom = std::max({std::abs(a), std::abs(n), floor});
    const double e = std::abs(a - n) / denom;
    r.per_coordinate_errors[static_cast<std::size_t>(k)] = e;
    r.max_rel_error = std::max(r.max_rel_error, e);
  }
  return r;
}

inline GradCheckReport check_gradient(const ScalarFn& f, const Vec& x, const Vec& analytic,
                                      double h = 1e-5) {
  return compare_gradients(analytic, finite_diff_gradient(f, x, h), h);
}

// Shortest decimal text that parses back to exactly v.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Column-major flattening helpers used by gradient checks and the optimizer.
inline Vec flatten(const Mat& m) { return Eigen::Map<const Vec>(m.data(), m.size()); }

inline Mat unflatten(const Vec& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Mat>(v.data(), rows, cols);
}

}  // namespace sscs
