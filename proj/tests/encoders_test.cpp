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

#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "sscs/encoders.hpp"

namespace sscs {
namespace {

Mat random_mat(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = n(rng);
  return m;
}

Vec random_vec(Eigen::Index n, std::mt19937_64& rng) { return random_mat(n, 1, rng).col(0); }

Affine random_affine(Eigen::Index in, Eigen::Index out, std::mt19937_64& rng) {
  return Affine{random_mat(out, in, rng), random_vec(out, rng)};
}

TEST(ProjectVideo, IdentityWithoutNormalizationIsNoOp) {
  std::mt19937_64 rng(1);
  const Mat f = random_mat(5, 4, rng);
  const ProjectedVideo p = project_video(f, identity_affine(4), false);
  EXPECT_EQ(p.out, f);
}

TEST(ProjectVideo, ZeroInputGivesZeroOrDegenerateError) {
  const Mat f = Mat::Zero(3, 4);
  const Affine zero_bias{Mat::Identity(2, 4), Vec::Zero(2)};
  EXPECT_EQ(project_video(f, zero_bias, false).out, Mat::Zero(3, 2));
  EXPECT_THROW(project_video(f, zero_bias, true), DegenerateInputError);
}

TEST(ProjectVideo, MatchesPerRowLoop) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat f = random_mat(6, 5, rng);
    const Affine psi = random_affine(5, 3, rng);
    for (bool normalize : {false, true}) {
      const Mat got = project_video(f, psi, normalize).out;
      for (Eigen::Index t = 0; t < f.rows(); ++t) {
        std::vector<double> row(3);
        double sq = 0.0;
        for (Eigen::Index o = 0; o < 3; ++o) {
          double acc = psi.bias[o];
          for (Eigen::Index c = 0; c < 5; ++c) acc += psi.weight(o, c) * f(t, c);
          row[static_cast<std::size_t>(o)] = acc;
          sq += acc * acc;
        }
        const double scale = normalize ? 1.0 / std::sqrt(sq) : 1.0;
        for (Eigen::Index o = 0; o < 3; ++o) EXPECT_NEAR(got(t, o), row[static_cast<std::size_t>(o)] * scale, 1e-9);
      }
    }
  }
}

TEST(ProjectVideo, ShapeMismatchRejected) {
  std::mt19937_64 rng(3);
  EXPECT_THROW(project_video(random_mat(2, 3, rng), identity_affine(4), false), ParameterError);
}

TEST(ProjectVideo, CosineWithTextInvariantToRowRescaling) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat f = random_mat(4, 5, rng);
    const Affine psi{random_mat(3, 5, rng), Vec::Zero(3)};
    const Affine phi = random_affine(6, 3, rng);
    const Vec y = project_text(random_vec(6, rng), phi, true).out;
    Mat scaled = f;
    for (Eigen::Index t = 0; t < f.rows(); ++t) scaled.row(t) *= scale(rng);
    const Mat a = project_video(f, psi, true).out;
    const Mat b = project_video(scaled, psi, true).out;
    for (Eigen::Index t = 0; t < f.rows(); ++t) {
      EXPECT_NEAR(cosine_similarity(a.row(t).transpose(), y), cosine_similarity(b.row(t).transpose(), y), 1e-9);
    }
  }
}

TEST(ProjectVideo, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  for (bool normalize : {false, true}) {
    const Mat f = random_mat(4, 3, rng);
    const Affine psi = random_affine(3, 2, rng);
    const Mat w = random_mat(4, 2, rng);
    const ProjectedVideo p = project_video(f, psi, normalize);
    GradMap grads;
    project_video_backward(f, p, w, grads, "psi");
    const ScalarFn fw = [&](const Vec& v) {
      return project_video(f, Affine{unflatten(v, 2, 3), psi.bias}, normalize).out.cwiseProduct(w).sum();
    };
    EXPECT_LT(check_gradient(fw, flatten(psi.weight), flatten(grads.at("psi.W"))).max_rel_error, 1e-5);
    const ScalarFn fb = [&](const Vec& v) {
      return project_video(f, Affine{psi.weight, v}, normalize).out.cwiseProduct(w).sum();
    };
    EXPECT_LT(check_gradient(fb, psi.bias, flatten(grads.at("psi.b"))).max_rel_error, 1e-5);
  }
}

TEST(ProjectText, IdentityZeroAndLoopOracle) {
  std::mt19937_64 rng(6);
  const Vec g = random_vec(4, rng);
  EXPECT_EQ(project_text(g, identity_affine(4), false).out, g);
  EXPECT_EQ(project_text(Vec::Zero(4), Affine{Mat::Identity(4, 4), Vec::Zero(4)}, false).out, Vec::Zero(4));
  EXPECT_THROW(project_text(Vec::Zero(4), identity_affine(4), true), DegenerateInputError);
  const Affine phi = random_affine(4, 3, rng);
  const Vec got = project_text(g, phi, false).out;
  for (Eigen::Index o = 0; o < 3; ++o) {
    double acc = phi.bias[o];
    for (Eigen::Index c = 0; c < 4; ++c) acc += phi.weight(o, c) * g[c];
    EXPECT_NEAR(got[o], acc, 1e-9);
  }
}

TEST(ProjectText, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  for (bool normalize : {false, true}) {
    const Vec g = random_vec(4, rng);
    const Affine phi = random_affine(4, 3, rng);
    const Vec w = random_vec(3, rng);
    const ProjectedText p = project_text(g, phi, normalize);
    GradMap grads;
    const Vec grad_g = project_text_backward(g, p, phi, w, grads, "phi");
    const ScalarFn fg = [&](const Vec& v) { return project_text(v, phi, normalize).out.dot(w); };
    EXPECT_LT(check_gradient(fg, g, grad_g).max_rel_error, 1e-5);
    const ScalarFn fw = [&](const Vec& v) {
      return project_text(g, Affine{unflatten(v, 3, 4), phi.bias}, normalize).out.dot(w);
    };
    EXPECT_LT(check_gradient(fw, flatten(phi.weight), flatten(grads.at("phi.W"))).max_rel_error, 1e-5);
  }
}

TEST(ToyTextEncoder, SingleTokenIsItsRow) {
  std::mt19937_64 rng(8);
  const Mat table = random_mat(5, 3, rng);
  EXPECT_EQ(toy_text_encode(TokenSequence{{3}}, table), table.row(3).transpose());
}

TEST(ToyTextEncoder, TwoOrthogonalTokensAverage) {
  Mat table(2, 2);
  table << 1, 0, 0, 1;
  const Vec g = toy_text_encode(TokenSequence{{0, 1}}, table);
  EXPECT_EQ(g[0], 0.5);
  EXPECT_EQ(g[1], 0.5);
}

TEST(ToyTextEncoder, MatchesLoopAndIsPermutationInvariant) {
  std::mt19937_64 rng(9);
  const Mat table = random_mat(10, 4, rng);
  std::uniform_int_distribution<int> tok(0, 9);
  for (int trial = 0; trial < 50; ++trial) {
    TokenSequence s;
    for (int k = 0; k < 1 + trial % 7; ++k) s.tokens.push_back(tok(rng));
    const Vec g = toy_text_encode(s, table);
    for (Eigen::Index c = 0; c < 4; ++c) {
      double acc = 0.0;
      for (int t : s.tokens) acc += table(t, c);
      EXPECT_NEAR(g[c], acc / static_cast<double>(s.size()), 1e-9);
    }
    TokenSequence shuffled = s;
    std::shuffle(shuffled.tokens.begin(), shuffled.tokens.end(), rng);
    EXPECT_LT((toy_text_encode(shuffled, table) - g).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ToyTextEncoder, InvalidTokensRejected) {
  const Mat table = Mat::Identity(3, 3);
  EXPECT_THROW(toy_text_encode(TokenSequence{{3}}, table), DataError);
  EXPECT_THROW(toy_text_encode(TokenSequence{{-1}}, table), DataError);
  EXPECT_THROW(toy_text_encode(TokenSequence{}, table), DataError);
}

TEST(ToyTextEncoder, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(10);
  const Mat table = random_mat(6, 3, rng);
  const TokenSequence s{{1, 4, 1, 2}};
  const Vec w = random_vec(3, rng);
  Mat grad = Mat::Zero(6, 3);
  toy_text_encode_backward(s, w, grad);
  const ScalarFn f = [&](const Vec& v) { return toy_text_encode(s, unflatten(v, 6, 3)).dot(w); };
  EXPECT_LT(check_gradient(f, flatten(table), flatten(grad)).max_rel_error, 1e-6);
}

TEST(Decoder, ZeroWeightsGiveUniformDistribution) {
  DecoderParams d{Affine{Mat::Zero(7, 4), Vec::Zero(7)}, Mat::Zero(7, 2)};
  std::mt19937_64 rng(11);
  const ProbabilityVec p = stable_softmax(decode_token_logits(random_vec(4, rng), d));
  for (Eigen::Index v = 0; v < 7; ++v) EXPECT_NEAR(p[v], 1.0 / 7.0, 1e-15);
}

TEST(Decoder, LargeGainSelectsToken) {
  Mat w = Mat::Zero(5, 3);
  w(0, 0) = 1000.0;
  DecoderParams d{Affine{w, Vec::Zero(5)}, Mat::Zero(5, 2)};
  Vec ctx(3);
  ctx << 1.0, 0.2, -0.3;
  const ProbabilityVec p = stable_softmax(decode_token_logits(ctx, d));
  EXPECT_NEAR(p[0], 1.0, 1e-12);
}

TEST(Decoder, MatchesLoopAndChecksShape) {
  std::mt19937_64 rng(12);
  DecoderParams d{random_affine(4, 6, rng), random_mat(6, 2, rng)};
  EXPECT_EQ(d.vocab_size(), 6);
  const Vec ctx = random_vec(4, rng);
  const Vec logits = decode_token_logits(ctx, d);
  for (Eigen::Index v = 0; v < 6; ++v) {
    double acc = d.output.bias[v];
    for (Eigen::Index c = 0; c < 4; ++c) acc += d.output.weight(v, c) * ctx[c];
    EXPECT_NEAR(logits[v], acc, 1e-9);
  }
  EXPECT_THROW(decode_token_logits(random_vec(3, rng), d), ParameterError);
}

TEST(Init, UniformWithinFanInBound) {
  std::mt19937_64 rng(13);
  const Affine a = make_affine(16, 8, rng);
  EXPECT_EQ(a.in_dim(), 16);
  EXPECT_EQ(a.out_dim(), 8);
  EXPECT_LE(a.weight.cwiseAbs().maxCoeff(), 0.25);
  EXPECT_LE(a.bias.cwiseAbs().maxCoeff(), 0.25);
  std::mt19937_64 again(13);
  EXPECT_EQ(make_affine(16, 8, again).weight, a.weight);
}

}  // namespace
}  // namespace sscs
