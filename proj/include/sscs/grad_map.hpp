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

#include <map>
#include <string>

#include "sscs/numerics.hpp"

namespace sscs {

// Named gradient (or parameter) arrays. Ordered so every traversal, and
// therefore every reduction and serialization, is deterministic.
using GradMap = std::map<std::string, Mat>;

inline void accumulate(GradMap& grads, const std::string& key, const Mat& g) {
  auto it = grads.find(key);
  if (it == grads.end()) {
    grads.emplace(key, g);
    return;
  }
  if (it->second.rows() != g.rows() || it->second.cols() != g.cols()) {
    throw ParameterError("gradient shape mismatch for key " + key);
  }
  it->second += g;
}

// dst += weight * src, key by key.
inline void accumulate_scaled(GradMap& dst, const GradMap& src, double weight) {
  for (const auto& [key, g] : src) accumulate(dst, key, weight * g);
}

inline Mat as_column(const Vec& v) { return v; }

}  // namespace sscs
