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

// Cross-supervision objectives over a mini-batch of clip and sentence
// embeddings:
//   * GT-clip contrastive loss (softmax MIL-NCE over GT clips as positives),
//   * support-set contrastive loss over pooled video embeddings,
//   * caption loss from a GT-clip or support-pooled context,
//   * the weighted combination with the host grounding loss.
// Every loss returns its value together with analytic gradients keyed by the
// embedding or parameter they belong to.

#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "sscs/encoders.hpp"
#include "sscs/grad_map.hpp"
#include "sscs/numerics.hpp"
#include "sscs/support_set.hpp"

namespace sscs {

struct BatchItem {
  Mat clips;  // X_i, T_i x D
  Vec text;   // Y_i, D
  GroundTruthInterval gt;
};

struct EmbeddingBatch {
  std::vector<BatchItem> items;
  // Rows of X_i and every Y_i have unit norm; pooled embeddings are then
  // re-normalized before entering the support-set contrastive loss.
  bool normalized = true;

  std::size_t size() const { return items.size(); }
  Eigen::Index dim() const { return items.empty() ? 0 : items.front().text.size(); }

  void validate() const {
    if (items.empty()) throw ParameterError("embedding batch is empty");
    const Eigen::Index d = dim();
    for (std::size_t i = 0; i < items.size(); ++i) {
      const auto& it = items[i];
      if (it.text.size() != d || it.clips.cols() != d) {
        throw ParameterError("embedding batch item " + std::to_string(i) + " has inconsistent dimension");
      }
      it.gt.validate(static_cast<int>(it.clips.rows()));
    }
  }
};

inline std::string clip_key(std::size_t i) { return "X/" + std::to_string(i); }
inline std::string text_key(std::size_t i) { return "Y/" + std::to_string(i); }
inline std::string context_key(std::size_t i) { return "w/" + std::to_string(i); }

struct LossWeights {
  double lambda1 = 0.1;
  double lambda2 = 0.1;
  double tau = 0.1;

  void validate() const {
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw ParameterError("loss weights must be non-negative");
    if (!(tau > 0.0)) throw ParameterError("temperature must be positive");
  }
};

struct LossBundle {
  double value = 0.0;
  GradMap grads;
};

// ---- GT-clip contrastive (MIL-NCE) -----------------------------------------

// For text i: positives are its GT clips, negatives are its background clips
// and every clip of every other video in the batch.
inline LossBundle gt_clip_contrastive_loss(const EmbeddingBatch& batch, const LossWeights& weights) {
  batch.validate();
  weights.validate();
  const double tau = weights.tau;
  const std::size_t b = batch.size();
  const Eigen::Index d = batch.dim();

  LossBundle out;
  std::vector<Mat> grad_x(b);
  for (std::size_t j = 0; j < b; ++j) grad_x[j] = Mat::Zero(batch.items[j].clips.rows(), d);

  for (std::size_t i = 0; i < b; ++i) {
    const BatchItem& item = batch.items[i];
    const Vec& y = item.text;
    // Logit layout: positives first, then own background, then other videos.
    std::vector<std::pair<std::size_t, Eigen::Index>> refs;
    const int n_pos = item.gt.length();
    for (int t = item.gt.start_clip; t <= item.gt.end_clip; ++t) refs.emplace_back(i, t);
    for (Eigen::Index t = 0; t < item.clips.rows(); ++t) {
      if (!item.gt.contains(static_cast<int>(t))) refs.emplace_back(i, t);
    }
    for (std::size_t j = 0; j < b; ++j) {
      if (j == i) continue;
      for (Eigen::Index t = 0; t < batch.items[j].clips.rows(); ++t) refs.emplace_back(j, t);
    }
    Vec logits(static_cast<Eigen::Index>(refs.size()));
    for (std::size_t k = 0; k < refs.size(); ++k) {
      logits[static_cast<Eigen::Index>(k)] = batch.items[refs[k].first].clips.row(refs[k].second).dot(y) / tau;
    }
    const Vec pos = logits.head(n_pos);
    out.value += log_sum_exp(logits) - log_sum_exp(pos);

    const ProbabilityVec p_all = stable_softmax(logits);
    const ProbabilityVec p_pos = stable_softmax(pos);
    Vec grad_logits = p_all.values;
    grad_logits.head(n_pos) -= p_pos.values;

    Vec grad_y = Vec::Zero(d);
    for (std::size_t k = 0; k < refs.size(); ++k) {
      const double g = grad_logits[static_cast<Eigen::Index>(k)] / tau;
      const auto [j, t] = refs[k];
      grad_x[j].row(t) += g * y.transpose();
      grad_y += g * batch.items[j].clips.row(t).transpose();
    }
    accumulate(out.grads, text_key(i), grad_y);
  }
  for (std::size_t j = 0; j < b; ++j) accumulate(out.grads, clip_key(j), grad_x[j]);
  return out;
}

// ---- support-set pooling over a batch --------------------------------------

struct SupportSetSpec {
  Construction construction = Construction::kVideo;
  PoolingMethod pooling = PoolingMethod::kCrossAttention;
  double tau = 0.1;
};

struct PooledItem {
  SupportSet support;
  PooledEmbedding pooled;
};

inline std::vector<PooledItem> pool_batch(const EmbeddingBatch& batch, Construction construction,
                                          const PoolingParams& params) {
  batch.validate();
  std::vector<PooledItem> out;
  out.reserve(batch.size());
  for (const BatchItem& item : batch.items) {
    PooledItem p;
    p.support = build_support_set(static_cast<int>(item.clips.rows()), item.gt, construction);
    p.pooled = pool_support(item.clips, item.text, p.support, params);
    out.push_back(std::move(p));
  }
  return out;
}

// Adds the gradient of w_bar_i back into X_i, Y_i and the pooling parameters.
inline void backprop_pooled(const EmbeddingBatch& batch, const std::vector<PooledItem>& pooled,
                            const PoolingParams& params, std::size_t i, const Vec& grad_wbar,
                            GradMap& grads) {
  const BatchItem& item = batch.items[i];
  PoolingGrad g = pool_support_backward(item.clips, item.text, pooled[i].support, params,
                                        pooled[i].pooled, grad_wbar);
  accumulate(grads, clip_key(i), g.clips);
  accumulate(grads, text_key(i), g.query);
  for (const auto& [key, m] : g.params) accumulate(grads, key, m);
}

// Core of the support-set contrastive loss on already pooled rows: row i of
// `wbar` is positive for row i of `texts`, negative for every other row.
struct PairwiseContrastive {
  double value = 0.0;
  Mat grad_wbar;
  Mat grad_texts;
};

inline PairwiseContrastive pairwise_contrastive(const Mat& wbar, const Mat& texts, double tau) {
  if (wbar.rows() != texts.rows() || wbar.cols() != texts.cols()) {
    throw ParameterError("pairwise_contrastive: shape mismatch");
  }
  if (!(tau > 0.0)) throw ParameterError("pairwise_contrastive: temperature must be positive");
  const Mat logits = wbar * texts.transpose() / tau;
  PairwiseContrastive out;
  out.grad_wbar = Mat::Zero(wbar.rows(), wbar.cols());
  out.grad_texts = Mat::Zero(texts.rows(), texts.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const Vec row = logits.row(i).transpose();
    out.value += log_sum_exp(row) - row[i];
    Vec g = stable_softmax(row).values;
    g[i] -= 1.0;
    g /= tau;
    out.grad_wbar.row(i) += (texts.transpose() * g).transpose();
    out.grad_texts += g * wbar.row(i);
  }
  return out;
}

inline LossBundle support_contrastive_loss(const std::vector<PooledItem>& pooled,
                                           const EmbeddingBatch& batch, const PoolingParams& params,
                                           const LossWeights& weights) {
  batch.validate();
  weights.validate();
  if (pooled.size() != batch.size()) throw ParameterError("support_contrastive_loss: pooled/batch size mismatch");
  const std::size_t b = batch.size();
  const Eigen::Index d = batch.dim();
  Mat wbar(static_cast<Eigen::Index>(b), d);
  Mat texts(static_cast<Eigen::Index>(b), d);
  for (std::size_t i = 0; i < b; ++i) {
    const Vec& w = pooled[i].pooled.w_bar;
    if (w.size() != d) throw ParameterError("support_contrastive_loss: pooled dimension mismatch");
    wbar.row(static_cast<Eigen::Index>(i)) = (batch.normalized ? l2_normalize(w) : w).transpose();
    texts.row(static_cast<Eigen::Index>(i)) = batch.items[i].text.transpose();
  }
  const PairwiseContrastive core = pairwise_contrastive(wbar, texts, weights.tau);
  LossBundle out;
  out.value = core.value;
  for (std::size_t i = 0; i < b; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    accumulate(out.grads, text_key(i), core.grad_texts.row(r).transpose());
    Vec gw = core.grad_wbar.row(r).transpose();
    if (batch.normalized) gw = l2_normalize_backward(pooled[i].pooled.w_bar, gw);
    backprop_pooled(batch, pooled, params, i, gw, out.grads);
  }
  return out;
}

// ---- caption objective -----------------------------------------------------

enum class CaptionSource { kGtConcat, kSupportPooled };

struct CaptionContext {
  Vec w;
  CaptionSource source = CaptionSource::kGtConcat;
};

inline constexpr const char* kCaptionWeightKey = "caption.W";
inline constexpr const char* kCaptionBiasKey = "caption.b";
inline constexpr const char* kDecoderWeightKey = "decoder.W";
inline constexpr const char* kDecoderBiasKey = "decoder.b";

inline Vec gt_mean(const BatchItem& item) {
  return item.clips.middleRows(item.gt.start_clip, item.gt.length()).colwise().mean().transpose();
}

// GT_CONCAT: mean of the GT clip embeddings followed by the affine map
// `transform`. SUPPORT_POOLED: the pooled w_bar as is.
inline CaptionContext make_caption_context(const BatchItem& item, CaptionSource mode,
                                           const PooledEmbedding* pooled, const Affine& transform) {
  CaptionContext c;
  c.source = mode;
  if (mode == CaptionSource::kSupportPooled) {
    if (pooled == nullptr) throw ParameterError("make_caption_context: support-pooled mode needs a pooled embedding");
    c.w = pooled->w_bar;
    return c;
  }
  item.gt.validate(static_cast<int>(item.clips.rows()));
  c.w = transform.apply(gt_mean(item));
  return c;
}

// Unigram head: every word of sentence i is scored against one softmax over
// the vocabulary computed from context i.
inline LossBundle caption_loss(const std::vector<CaptionContext>& contexts,
                               const std::vector<TokenSequence>& sentences, const DecoderParams& decoder) {
  if (contexts.size() != sentences.size() || contexts.empty()) {
    throw ParameterError("caption_loss: contexts and sentences must be aligned and non-empty");
  }
  const double inv_b = 1.0 / static_cast<double>(contexts.size());
  const Eigen::Index vocab = decoder.vocab_size();
  LossBundle out;
  Mat grad_w = Mat::Zero(decoder.output.weight.rows(), decoder.output.weight.cols());
  Vec grad_bias = Vec::Zero(vocab);
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    validate_tokens(sentences[i], vocab);
    const Vec logits = decode_token_logits(contexts[i].w, decoder);
    const double lse = log_sum_exp(logits);
    const double inv_m = 1.0 / static_cast<double>(sentences[i].size());
    Vec grad_logits = stable_softmax(logits).values;
    double nll = 0.0;
    for (int tok : sentences[i].tokens) {
      nll += lse - logits[tok];
      grad_logits[tok] -= inv_m;
    }
    out.value += inv_b * inv_m * nll;
    grad_logits *= inv_b;
    grad_w += grad_logits * contexts[i].w.transpose();
    grad_bias += grad_logits;
    accumulate(out.grads, context_key(i), decoder.output.weight.transpose() * grad_logits);
  }
  accumulate(out.grads, kDecoderWeightKey, grad_w);
  accumulate(out.grads, kDecoderBiasKey, grad_bias);
  return out;
}

// Caption loss with context gradients pushed back into X_i (and Y_i / pooling
// parameters for support-pooled contexts). Context keys are consumed.
inline LossBundle caption_objective(const EmbeddingBatch& batch, const std::vector<TokenSequence>& sentences,
                                    CaptionSource mode, const std::vector<PooledItem>* pooled,
                                    const PoolingParams* pool_params, const Affine& transform,
                                    const DecoderParams& decoder) {
  batch.validate();
  std::vector<CaptionContext> contexts;
  contexts.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const PooledEmbedding* p = pooled != nullptr ? &(*pooled)[i].pooled : nullptr;
    contexts.push_back(make_caption_context(batch.items[i], mode, p, transform));
  }
  LossBundle raw = caption_loss(contexts, sentences, decoder);
  LossBundle out;
  out.value = raw.value;
  Mat grad_tw = Mat::Zero(transform.weight.rows(), transform.weight.cols());
  Vec grad_tb = Vec::Zero(transform.bias.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto node = raw.grads.extract(context_key(i));
    const Vec gw = node.mapped();
    const BatchItem& item = batch.items[i];
    if (mode == CaptionSource::kSupportPooled) {
      backprop_pooled(batch, *pooled, *pool_params, i, gw, out.grads);
      continue;
    }
    const Vec mean = gt_mean(item);
    grad_tw += gw * mean.transpose();
    grad_tb += gw;
    const Vec grad_mean = transform.weight.transpose() * gw / static_cast<double>(item.gt.length());
    Mat gx = Mat::Zero(item.clips.rows(), item.clips.cols());
    gx.middleRows(item.gt.start_clip, item.gt.length()).rowwise() = grad_mean.transpose();
    accumulate(out.grads, clip_key(i), gx);
  }
  if (mode == CaptionSource::kGtConcat) {
    accumulate(out.grads, kCaptionWeightKey, grad_tw);
    accumulate(out.grads, kCaptionBiasKey, grad_tb);
  }
  for (auto& [key, g] : raw.grads) accumulate(out.grads, key, g);
  return out;
}

// ---- combination -----------------------------------------------------------

inline LossBundle total_loss(const LossBundle& grounding, const LossBundle& contrast,
                             const LossBundle& caption, const LossWeights& weights) {
  weights.validate();
  LossBundle out;
  out.value = grounding.value + weights.lambda1 * contrast.value + weights.lambda2 * caption.value;
  accumulate_scaled(out.grads, grounding.grads, 1.0);
  if (weights.lambda1 != 0.0) accumulate_scaled(out.grads, contrast.grads, weights.lambda1);
  if (weights.lambda2 != 0.0) accumulate_scaled(out.grads, caption.grads, weights.lambda2);
  return out;
}

// GT-clip supervision: MIL-NCE plus the caption loss on GT contexts, unweighted.
inline LossBundle gt_supervision_suite(const EmbeddingBatch& batch, const std::vector<TokenSequence>& sentences,
                                       const LossWeights& weights, const Affine& transform,
                                       const DecoderParams& decoder) {
  LossBundle contrast = gt_clip_contrastive_loss(batch, weights);
  LossBundle caption = caption_objective(batch, sentences, CaptionSource::kGtConcat, nullptr, nullptr,
                                         transform, decoder);
  LossBundle out;
  out.value = contrast.value + caption.value;
  accumulate_scaled(out.grads, contrast.grads, 1.0);
  accumulate_scaled(out.grads, caption.grads, 1.0);
  return out;
}

// Support-set supervision: pooled contrastive loss plus the caption loss on
// the pooled contexts, unweighted.
inline LossBundle support_supervision_suite(const EmbeddingBatch& batch,
                                            const std::vector<TokenSequence>& sentences,
                                            Construction construction, const PoolingParams& params,
                                            const LossWeights& weights, const DecoderParams& decoder) {
  const std::vector<PooledItem> pooled = pool_batch(batch, construction, params);
  LossBundle contrast = support_contrastive_loss(pooled, batch, params, weights);
  const Affine unused{Mat::Zero(0, 0), Vec::Zero(0)};
  LossBundle caption = caption_objective(batch, sentences, CaptionSource::kSupportPooled, &pooled, &params,
                                         unused, decoder);
  LossBundle out;
  out.value = contrast.value + caption.value;
  accumulate_scaled(out.grads, contrast.grads, 1.0);
  accumulate_scaled(out.grads, caption.grads, 1.0);
  return out;
}

}  // namespace sscs
