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

#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "sscs/grad_map.hpp"
#include "sscs/harness/model.hpp"

namespace sscs {

// Adam with bias correction. Moments are created lazily per key; keys absent
// from a step's gradients are left untouched.
struct AdamOptimizer {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long long step_count = 0;
  std::map<std::string, Mat> first;
  std::map<std::string, Mat> second;

  void step(ModelParams& params, const GradMap& grads, double lr) {
    ++step_count;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    params.for_each([&](const std::string& key, Eigen::Map<Mat> w) {
      const auto g = grads.find(key);
      if (g == grads.end()) return;
      if (g->second.rows() != w.rows() || g->second.cols() != w.cols()) {
        throw ParameterError("gradient shape mismatch for parameter " + key);
      }
      auto [m, fresh_m] = first.try_emplace(key, Mat::Zero(w.rows(), w.cols()));
      auto [v, fresh_v] = second.try_emplace(key, Mat::Zero(w.rows(), w.cols()));
      m->second = beta1 * m->second + (1.0 - beta1) * g->second;
      v->second = beta2 * v->second + (1.0 - beta2) * g->second.cwiseAbs2();
      w.array() -= lr * (m->second.array() / c1) / ((v->second.array() / c2).sqrt() + eps);
    });
  }
};

// ReduceLROnPlateau ("min" mode, relative threshold): after more than
// `patience` consecutive evaluations without improvement the learning rate is
// multiplied by `factor`.
struct PlateauScheduler {
  double factor = 0.5;
  int patience = 2;
  double threshold = 1e-4;
  double lr = 1e-3;
  double best = std::numeric_limits<double>::infinity();
  int bad_evaluations = 0;

  void observe(double metric) {
    if (metric < best * (1.0 - threshold) || best == std::numeric_limits<double>::infinity()) {
      best = metric;
      bad_evaluations = 0;
      return;
    }
    if (++bad_evaluations > patience) {
      lr *= factor;
      bad_evaluations = 0;
    }
  }
};

}  // namespace sscs
