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

// Desk-scale encoders: affine projections into the shared space, a
// bag-of-words text encoder and the unigram caption decoder head.

#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "sscs/grad_map.hpp"
#include "sscs/numerics.hpp"

namespace sscs {

struct Affine {
  Mat weight;  // out x in
  Vec bias;    // out

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }

  Vec apply(const Vec& x) const {
    if (x.size() != in_dim()) {
      throw ParameterError("affine map expects input of dim " + std::to_string(in_dim()) +
                           ", got " + std::to_string(x.size()));
    }
    return weight * x + bias;
  }
};

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
inline Mat uniform_init(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Mat m(rows, cols);
  // Fill row by row so the draw order does not depend on storage order.
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  return m;
}

inline Affine make_affine(Eigen::Index in, Eigen::Index out, std::mt19937_64& rng) {
  return Affine{uniform_init(out, in, in, rng), uniform_init(out, 1, in, rng).col(0)};
}

inline Affine identity_affine(Eigen::Index dim) {
  return Affine{Mat::Identity(dim, dim), Vec::Zero(dim)};
}

struct ProjectionParams {
  Affine video;  // Psi: D_v -> D
  Affine text;   // Phi: D_l -> D
};

struct TokenSequence {
  std::vector<int> tokens;

  std::size_t size() const { return tokens.size(); }
};

struct DecoderParams {
  Affine output;    // D -> vocab logits
  Mat token_table;  // vocab x D_l, rows are word embeddings

  Eigen::Index vocab_size() const { return output.out_dim(); }
};

inline void validate_tokens(const TokenSequence& s, Eigen::Index vocab) {
  if (s.tokens.empty()) throw DataError("token sequence is empty");
  for (int t : s.tokens) {
    if (t < 0 || t >= vocab) {
      throw DataError("token id " + std::to_string(t) + " outside vocabulary of size " +
                      std::to_string(vocab));
    }
  }
}

// ---- projections -----------------------------------------------------------

struct ProjectedVideo {
  Mat raw;  // before normalization
  Mat out;
  bool normalized = false;
};

inline ProjectedVideo project_video(const Mat& features, const Affine& psi, bool normalize) {
  if (features.cols() != psi.in_dim()) {
    throw ParameterError("project_video: feature dim " + std::to_string(features.cols()) +
                         " does not match projection input " + std::to_string(psi.in_dim()));
  }
  ProjectedVideo p;
  p.raw = features * psi.weight.transpose();
  p.raw.rowwise() += psi.bias.transpose();
  p.normalized = normalize;
  p.out = p.raw;
  if (normalize) {
    for (Eigen::Index t = 0; t < p.raw.rows(); ++t) p.out.row(t) = l2_normalize(p.raw.row(t).transpose());
  }
  return p;
}

// Accumulates d(psi) into grads[prefix.W / prefix.b].
inline void project_video_backward(const Mat& features, const ProjectedVideo& p, const Mat& grad_out,
                                   GradMap& grads, const std::string& prefix) {
  Mat grad_raw = grad_out;
  if (p.normalized) {
    for (Eigen::Index t = 0; t < p.raw.rows(); ++t) {
      grad_raw.row(t) = l2_normalize_backward(p.raw.row(t).transpose(), grad_out.row(t).transpose());
    }
  }
  accumulate(grads, prefix + ".W", grad_raw.transpose() * features);
  accumulate(grads, prefix + ".b", grad_raw.colwise().sum().transpose());
}

struct ProjectedText {
  Vec raw;
  Vec out;
  bool normalized = false;
};

inline ProjectedText project_text(const Vec& g, const Affine& phi, bool normalize) {
  ProjectedText p;
  p.raw = phi.apply(g);
  p.normalized = normalize;
  p.out = normalize ? l2_normalize(p.raw) : p.raw;
  return p;
}

// Returns dL/dG and accumulates d(phi).
inline Vec project_text_backward(const Vec& g, const ProjectedText& p, const Affine& phi,
                                 const Vec& grad_out, GradMap& grads, const std::string& prefix) {
  const Vec grad_raw = p.normalized ? l2_normalize_backward(p.raw, grad_out) : grad_out;
  accumulate(grads, prefix + ".W", grad_raw * g.transpose());
  accumulate(grads, prefix + ".b", grad_raw);
  return phi.weight.transpose() * grad_raw;
}

// ---- toy text encoder ------------------------------------------------------

// Mean of the token embedding rows; order-insensitive by construction.
inline Vec toy_text_encode(const TokenSequence& s, const Mat& table) {
  validate_tokens(s, table.rows());
  Vec g = Vec::Zero(table.cols());
  for (int t : s.tokens) g += table.row(t).transpose();
  return g / static_cast<double>(s.size());
}

inline void toy_text_encode_backward(const TokenSequence& s, const Vec& grad_out, Mat& grad_table) {
  const Vec share = grad_out / static_cast<double>(s.size());
  for (int t : s.tokens) grad_table.row(t) += share.transpose();
}

// ---- decoder head ----------------------------------------------------------

inline Vec decode_token_logits(const Vec& context, const DecoderParams& decoder) {
  if (context.size() != decoder.output.in_dim()) {
    throw ParameterError("decode_token_logits: context dim " + std::to_string(context.size()) +
                         " does not match decoder input " + std::to_string(decoder.output.in_dim()));
  }
  return decoder.output.apply(context);
}

}  // namespace sscs
