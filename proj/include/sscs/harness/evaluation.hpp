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

// Held-out evaluation: proposal ranking with NMS, Rank n@m, clip/text
// similarity recall, support-pooled similarity matrices and retrieval.

#pragma once

#include <algorithm>
#include <thread>
#include <vector>

#include "sscs/grounding.hpp"
#include "sscs/harness/config.hpp"
#include "sscs/harness/model.hpp"

namespace sscs {

// Runs fn(i) for i in [0, n) on `threads` workers. Results must be written to
// per-index slots; any reduction happens afterwards in index order.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct QueryEvaluation {
  QueryPrediction prediction;
  double video_similarity = 0.0;  // mean cosine over all clips
  double gt_similarity = 0.0;     // mean cosine over GT clips
};

inline QueryEvaluation evaluate_query(const ModelParams& p, const ExperimentConfig& cfg, const GroundingSample& s) {
  const ForwardState fwd = forward_embeddings(p, {&s}, cfg.normalize_embeddings);
  const BatchItem& item = fwd.batch.items.front();
  const ProposalScores scores = score_proposals(item.clips, item.text, p.grounder);
  QueryEvaluation q;
  q.prediction.video_id = s.video_id;
  q.prediction.gt = s.gt_span();
  q.prediction.spans = nms(to_scored_spans(scores.proposals, s.clip_duration_s), cfg.nms_threshold);
  q.video_similarity = mean_clip_text_similarity(item.clips, item.text, nullptr);
  q.gt_similarity = mean_clip_text_similarity(item.clips, item.text, &s.gt);
  return q;
}

struct Evaluation {
  std::vector<QueryPrediction> predictions;
  std::vector<double> video_similarities;
  std::vector<double> gt_similarities;
  MetricsReport metrics;
};

inline Evaluation evaluate_model(const ModelParams& p, const ExperimentConfig& cfg,
                                 const std::vector<GroundingSample>& samples) {
  std::vector<QueryEvaluation> per(samples.size());
  parallel_for(samples.size(), cfg.threads, [&](std::size_t i) { per[i] = evaluate_query(p, cfg, samples[i]); });
  Evaluation ev;
  std::vector<double> durations;
  for (std::size_t i = 0; i < per.size(); ++i) {
    ev.predictions.push_back(std::move(per[i].prediction));
    ev.video_similarities.push_back(per[i].video_similarity);
    ev.gt_similarities.push_back(per[i].gt_similarity);
    durations.push_back(samples[i].duration_s());
  }
  ev.metrics = metrics_from_predictions(ev.predictions, cfg.rank_n, cfg.rank_m, durations);
  ev.metrics.thresholds = cfg.recall_thresholds;
  ev.metrics.recall_video = recall_high_related(ev.video_similarities, cfg.recall_thresholds);
  ev.metrics.recall_gt = recall_high_related(ev.gt_similarities, cfg.recall_thresholds);
  return ev;
}

// Rank1@m only, without the recall and histogram bookkeeping.
inline double rank1_rate(const ModelParams& p, const ExperimentConfig& cfg, const std::vector<GroundingSample>& samples,
                         double m = 0.5) {
  std::vector<char> hit(samples.size(), 0);
  parallel_for(samples.size(), cfg.threads, [&](std::size_t i) {
    const QueryEvaluation q = evaluate_query(p, cfg, samples[i]);
    hit[i] = rank_n_at_m(q.prediction.spans, q.prediction.gt, 1, m) ? 1 : 0;
  });
  if (samples.empty()) return 0.0;
  return static_cast<double>(std::count(hit.begin(), hit.end(), 1)) / static_cast<double>(samples.size());
}

// S(i, j) = <normalized w_bar_i, Y_j>, with w_bar_i the support-pooled
// embedding of video i under its own query.
inline Mat similarity_matrix(const ModelParams& p, const ExperimentConfig& cfg,
                             const std::vector<const GroundingSample*>& samples) {
  const ForwardState fwd = forward_embeddings(p, samples, cfg.normalize_embeddings);
  const PoolingParams pp = pooling_for(p, cfg);
  const std::vector<PooledItem> pooled = pool_batch(fwd.batch, cfg.support.construction, pp);
  const auto n = static_cast<Eigen::Index>(samples.size());
  Mat videos(n, cfg.dim);
  Mat texts(n, cfg.dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec& w = pooled[static_cast<std::size_t>(i)].pooled.w_bar;
    videos.row(i) = (cfg.normalize_embeddings ? l2_normalize(w) : w).transpose();
    texts.row(i) = fwd.batch.items[static_cast<std::size_t>(i)].text.transpose();
  }
  return videos * texts.transpose();
}

// Text-to-video retrieval inside consecutive batches of `batch_size`: text j
// is correct when video j has the highest similarity in its column.
inline double retrieval_accuracy(const ModelParams& p, const ExperimentConfig& cfg,
                                 const std::vector<GroundingSample>& samples, int batch_size) {
  std::size_t correct = 0;
  std::size_t total = 0;
  for (std::size_t start = 0; start + static_cast<std::size_t>(batch_size) <= samples.size(); start += static_cast<std::size_t>(batch_size)) {
    std::vector<const GroundingSample*> chunk;
    for (int k = 0; k < batch_size; ++k) chunk.push_back(&samples[start + static_cast<std::size_t>(k)]);
    const Mat s = similarity_matrix(p, cfg, chunk);
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
      Eigen::Index best = 0;
      s.col(j).maxCoeff(&best);
      correct += best == j ? 1 : 0;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

// Mean clip/text cosine over background clips that contain at least one query
// entity, and over GT clips. Needs synthetic clip annotations.
struct EntityAlignment {
  double shared_entity_background = 0.0;
  double ground_truth = 0.0;
};

inline EntityAlignment entity_alignment(const ModelParams& p, const ExperimentConfig& cfg,
                                        const std::vector<GroundingSample>& samples) {
  double bg_sum = 0.0;
  double gt_sum = 0.0;
  long bg_n = 0;
  long gt_n = 0;
  for (const GroundingSample& s : samples) {
    if (s.clip_entities.empty()) throw DataError("entity_alignment: sample " + s.video_id + " has no clip annotations");
    const ForwardState fwd = forward_embeddings(p, {&s}, cfg.normalize_embeddings);
    const BatchItem& item = fwd.batch.items.front();
    for (int t = 0; t < s.num_clips(); ++t) {
      const double c = cosine_similarity(item.clips.row(t).transpose(), item.text);
      if (s.gt.contains(t)) {
        gt_sum += c;
        ++gt_n;
      } else if (std::any_of(s.clip_entities[static_cast<std::size_t>(t)].begin(),
                             s.clip_entities[static_cast<std::size_t>(t)].end(), [&](int e) {
                               return std::find(s.tokens.tokens.begin(), s.tokens.tokens.end(), e) !=
                                      s.tokens.tokens.end();
                             })) {
        bg_sum += c;
        ++bg_n;
      }
    }
  }
  EntityAlignment a;
  a.shared_entity_background = bg_n > 0 ? bg_sum / static_cast<double>(bg_n) : 0.0;
  a.ground_truth = gt_n > 0 ? gt_sum / static_cast<double>(gt_n) : 0.0;
  return a;
}

}  // namespace sscs
