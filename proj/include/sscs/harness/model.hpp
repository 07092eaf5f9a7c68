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

// The full trainable model: encoders, caption transform and decoder, pooling
// parameters and the mini grounder, with one forward/backward pass producing
// every loss component of a training step.

#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "sscs/encoders.hpp"
#include "sscs/grounding.hpp"
#include "sscs/harness/config.hpp"
#include "sscs/objectives.hpp"
#include "sscs/support_set.hpp"

namespace sscs {

struct ModelParams {
  ProjectionParams projection;
  DecoderParams decoder;
  Affine caption;  // Phi': GT-clip mean -> caption context
  GrounderParams grounder;
  PoolingParams pooling;

  // Visits every trainable array under its gradient key.
  template <class F>
  void for_each(F&& f) {
    auto visit = [&](const char* key, auto& m) { f(std::string(key), Eigen::Map<Mat>(m.data(), m.rows(), m.cols())); };
    visit("psi.W", projection.video.weight);
    visit("psi.b", projection.video.bias);
    visit("phi.W", projection.text.weight);
    visit("phi.b", projection.text.bias);
    visit("tokens.E", decoder.token_table);
    visit(kCaptionWeightKey, caption.weight);
    visit(kCaptionBiasKey, caption.bias);
    visit(kDecoderWeightKey, decoder.output.weight);
    visit(kDecoderBiasKey, decoder.output.bias);
    visit(kGrounderWeightKey, grounder.weight);
    f(std::string(kGrounderLengthKey), Eigen::Map<Mat>(&grounder.length_bias, 1, 1));
    f(std::string(kGrounderBiasKey), Eigen::Map<Mat>(&grounder.bias, 1, 1));
    visit(kFcWeightKey, pooling.fc_weight);
    visit(kFcBiasKey, pooling.fc_bias);
    visit(kConvKernelKey, pooling.conv_kernel);
    visit(kConvBiasKey, pooling.conv_bias);
  }

  template <class F>
  void for_each(F&& f) const {
    const_cast<ModelParams*>(this)->for_each([&](const std::string& k, Eigen::Map<Mat> m) {
      f(k, Eigen::Map<const Mat>(m.data(), m.rows(), m.cols()));
    });
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each([&](const std::string&, const Eigen::Map<const Mat>& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
  }
};

inline ModelParams init_model(const ExperimentConfig& cfg, int dim_video, std::uint64_t seed) {
  const int d = cfg.dim;
  const int vocab = cfg.effective_vocab();
  std::mt19937_64 rng(seed ^ 0x5eed5eed5eedULL);
  ModelParams p;
  p.projection.video = make_affine(dim_video, d, rng);
  p.projection.text = make_affine(cfg.dim_text, d, rng);
  p.decoder.token_table = uniform_init(vocab, cfg.dim_text, 1, rng);
  p.caption = make_affine(d, d, rng);
  p.decoder.output = make_affine(d, vocab, rng);
  p.grounder.weight = Vec::Ones(d);  // evidence starts as the clip-text cosine
  p.grounder.length_bias = 0.0;
  p.grounder.bias = 0.0;
  p.grounder.scale = 1.0 / cfg.weights.tau;
  p.pooling.method = cfg.support.pooling;
  p.pooling.tau = cfg.weights.tau;
  p.pooling.t_max = cfg.t_max;
  p.pooling.conv_width = cfg.conv_width;
  p.pooling.fc_weight = uniform_init(d, static_cast<Eigen::Index>(cfg.t_max) * d, static_cast<Eigen::Index>(cfg.t_max) * d, rng);
  p.pooling.fc_bias = uniform_init(d, 1, static_cast<Eigen::Index>(cfg.t_max) * d, rng).col(0);
  p.pooling.conv_kernel = uniform_init(d, static_cast<Eigen::Index>(cfg.conv_width) * d, static_cast<Eigen::Index>(cfg.conv_width) * d, rng);
  p.pooling.conv_bias = uniform_init(d, 1, static_cast<Eigen::Index>(cfg.conv_width) * d, rng).col(0);
  return p;
}

// Embeddings of a set of samples plus what the backward pass needs.
struct ForwardState {
  std::vector<ProjectedVideo> videos;
  std::vector<Vec> sentence_features;  // G_i
  std::vector<ProjectedText> texts;
  EmbeddingBatch batch;
};

inline ForwardState forward_embeddings(const ModelParams& p, const std::vector<const GroundingSample*>& samples,
                                       bool normalize) {
  ForwardState s;
  s.batch.normalized = normalize;
  for (const GroundingSample* sample : samples) {
    s.videos.push_back(project_video(sample->features, p.projection.video, normalize));
    s.sentence_features.push_back(toy_text_encode(sample->tokens, p.decoder.token_table));
    s.texts.push_back(project_text(s.sentence_features.back(), p.projection.text, normalize));
    s.batch.items.push_back(BatchItem{s.videos.back().out, s.texts.back().out, sample->gt});
  }
  return s;
}

struct StepLoss {
  LossBundle total;  // gradient keys are parameter names
  double grounding = 0.0;
  double contrast = 0.0;
  double caption = 0.0;
};

inline bool contrast_active(const ExperimentConfig& cfg) {
  return cfg.mode != SupervisionMode::kBaseline && cfg.use_contrast;
}
inline bool caption_active(const ExperimentConfig& cfg) {
  return cfg.mode != SupervisionMode::kBaseline && cfg.use_caption;
}

inline PoolingParams pooling_for(const ModelParams& p, const ExperimentConfig& cfg) {
  PoolingParams pp = p.pooling;
  pp.method = cfg.support.pooling;
  pp.tau = cfg.weights.tau;
  return pp;
}

// Chains embedding gradients (keys X/i, Y/i) into the encoder parameters.
inline void backprop_embeddings(const ModelParams& p, const std::vector<const GroundingSample*>& samples,
                                const ForwardState& fwd, GradMap& grads) {
  Mat grad_table = Mat::Zero(p.decoder.token_table.rows(), p.decoder.token_table.cols());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (auto node = grads.extract(clip_key(i)); !node.empty()) {
      project_video_backward(samples[i]->features, fwd.videos[i], node.mapped(), grads, "psi");
    }
    if (auto node = grads.extract(text_key(i)); !node.empty()) {
      const Vec gy = node.mapped();
      const Vec gg = project_text_backward(fwd.sentence_features[i], fwd.texts[i], p.projection.text, gy, grads, "phi");
      toy_text_encode_backward(samples[i]->tokens, gg, grad_table);
    }
  }
  accumulate(grads, "tokens.E", grad_table);
}

inline StepLoss compute_step_loss(const ModelParams& p, const ExperimentConfig& cfg,
                                  const std::vector<const GroundingSample*>& samples) {
  const ForwardState fwd = forward_embeddings(p, samples, cfg.normalize_embeddings);
  const EmbeddingBatch& batch = fwd.batch;
  StepLoss out;
  LossBundle vg = grounding_loss(batch, p.grounder);
  LossBundle contrast;
  LossBundle caption;
  std::vector<TokenSequence> sentences;
  for (const GroundingSample* s : samples) sentences.push_back(s->tokens);

  if (cfg.mode == SupervisionMode::kGtc) {
    if (cfg.use_contrast) contrast = gt_clip_contrastive_loss(batch, cfg.weights);
    if (cfg.use_caption) {
      caption = caption_objective(batch, sentences, CaptionSource::kGtConcat, nullptr, nullptr, p.caption, p.decoder);
    }
  } else if (cfg.mode == SupervisionMode::kSs && (cfg.use_contrast || cfg.use_caption)) {
    const PoolingParams pp = pooling_for(p, cfg);
    const std::vector<PooledItem> pooled = pool_batch(batch, cfg.support.construction, pp);
    if (cfg.use_contrast) contrast = support_contrastive_loss(pooled, batch, pp, cfg.weights);
    if (cfg.use_caption) {
      caption = caption_objective(batch, sentences, CaptionSource::kSupportPooled, &pooled, &pp, p.caption, p.decoder);
    }
  }
  out.grounding = vg.value;
  out.contrast = contrast.value;
  out.caption = caption.value;
  out.total = total_loss(vg, contrast, caption, cfg.weights);
  backprop_embeddings(p, samples, fwd, out.total.grads);
  return out;
}

// Flattened parameter vector in visiting order (for gradient checks).
inline Vec flatten_params(const ModelParams& p, const std::vector<std::string>& keys) {
  std::vector<double> buf;
  p.for_each([&](const std::string& k, const Eigen::Map<const Mat>& m) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) return;
    buf.insert(buf.end(), m.data(), m.data() + m.size());
  });
  return Eigen::Map<Vec>(buf.data(), static_cast<Eigen::Index>(buf.size()));
}

inline void assign_params(ModelParams& p, const std::vector<std::string>& keys, const Vec& flat) {
  Eigen::Index off = 0;
  p.for_each([&](const std::string& k, Eigen::Map<Mat> m) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) return;
    m = Eigen::Map<const Mat>(flat.data() + off, m.rows(), m.cols());
    off += m.size();
  });
}

inline Vec flatten_grads(const ModelParams& p, const std::vector<std::string>& keys, const GradMap& grads) {
  std::vector<double> buf;
  p.for_each([&](const std::string& k, const Eigen::Map<const Mat>& m) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) return;
    const auto it = grads.find(k);
    if (it == grads.end()) {
      buf.insert(buf.end(), static_cast<std::size_t>(m.size()), 0.0);
    } else {
      buf.insert(buf.end(), it->second.data(), it->second.data() + it->second.size());
    }
  });
  return Eigen::Map<Vec>(buf.data(), static_cast<Eigen::Index>(buf.size()));
}

}  // namespace sscs
