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

// Grounding substrate: a synthetic planted-entity world, exhaustive proposal
// scoring with a Hadamard-fusion mini grounder (the host loss L^vg), and the
// evaluation metrics (temporal IoU, greedy NMS, Rank n@m, similarity recall,
// interval histograms).

#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sscs/encoders.hpp"
#include "sscs/grad_map.hpp"
#include "sscs/numerics.hpp"
#include "sscs/objectives.hpp"
#include "sscs/support_set.hpp"

namespace sscs {

// ---- intervals -------------------------------------------------------------

// Half-open time span [start, end), seconds or clip units.
struct Span {
  double start = 0.0;
  double end = 0.0;

  double length() const { return end - start; }
  friend bool operator==(const Span&, const Span&) = default;
};

inline double temporal_iou(const Span& a, const Span& b) {
  const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const double union_len = a.length() + b.length() - inter;
  if (!(union_len > 0.0)) return 0.0;
  return inter / union_len;
}

// start = floor(t_s / d), end = ceil(t_e / d) - 1, clamped to [0, T-1].
inline GroundTruthInterval seconds_to_clips(double start_s, double end_s, double clip_duration_s, int num_clips) {
  if (!(clip_duration_s > 0.0)) throw ParameterError("clip duration must be positive");
  if (!(start_s >= 0.0) || !(end_s > start_s)) throw DataError("ground-truth seconds must satisfy 0 <= t_s < t_e");
  int s = static_cast<int>(std::floor(start_s / clip_duration_s));
  int e = static_cast<int>(std::ceil(end_s / clip_duration_s)) - 1;
  s = std::clamp(s, 0, num_clips - 1);
  e = std::clamp(e, s, num_clips - 1);
  return GroundTruthInterval{s, e};
}

inline Span clips_to_span(int start_clip, int end_clip, double clip_duration_s) {
  return Span{start_clip * clip_duration_s, (end_clip + 1) * clip_duration_s};
}

// ---- samples and the synthetic world ---------------------------------------

struct GroundingSample {
  std::string video_id;
  Mat features;  // T x D_v
  TokenSequence tokens;
  double gt_start_s = 0.0;
  double gt_end_s = 0.0;
  double clip_duration_s = 1.0;
  GroundTruthInterval gt;
  // Synthetic ground truth of which query entities appear in each clip; empty
  // for ingested data.
  std::vector<std::vector<int>> clip_entities;

  int num_clips() const { return static_cast<int>(features.rows()); }
  Span gt_span() const { return Span{gt_start_s, gt_end_s}; }
  double duration_s() const { return num_clips() * clip_duration_s; }
};

struct SyntheticWorldConfig {
  int n_entities = 24;
  int n_actions = 12;
  int dim_video = 64;
  int num_clips = 16;
  int entities_per_video = 2;
  double entity_rate = 0.8;       // per-clip presence probability of each video entity
  double noise_sigma = 0.3;
  double gt_fraction_min = 0.15;
  double gt_fraction_max = 0.45;
  double distractor_rate = 0.5;   // chance of a background segment: query action, other entities
  double clip_duration_s = 1.0;

  int vocab_size() const { return n_entities + n_actions; }

  void validate() const {
    if (n_entities < 1 || n_actions < 1 || dim_video < 1 || num_clips < 1) {
      throw ParameterError("synthetic world: counts must be positive");
    }
    if (entities_per_video < 1 || entities_per_video > n_entities) {
      throw ParameterError("synthetic world: entities_per_video must be in [1, n_entities]");
    }
    if (!(noise_sigma >= 0.0)) throw ParameterError("synthetic world: noise_sigma must be >= 0");
    if (!(entity_rate >= 0.0 && entity_rate <= 1.0)) throw ParameterError("synthetic world: entity_rate must be in [0,1]");
    if (!(distractor_rate >= 0.0 && distractor_rate <= 1.0)) {
      throw ParameterError("synthetic world: distractor_rate must be in [0,1]");
    }
    if (!(gt_fraction_min > 0.0 && gt_fraction_min <= gt_fraction_max && gt_fraction_max <= 1.0)) {
      throw ParameterError("synthetic world: need 0 < gt_fraction_min <= gt_fraction_max <= 1");
    }
    if (!(clip_duration_s > 0.0)) throw ParameterError("synthetic world: clip duration must be positive");
  }
};

inline Mat random_unit_rows(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = normal(rng);
    m.row(r).normalize();
  }
  return m;
}

// Fixed entity/action directions; samples are drawn from independent streams
// so train/validation/test splits share one world.
class SyntheticWorld {
 public:
  SyntheticWorld(SyntheticWorldConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    std::mt19937_64 rng(seed);
    entities_ = random_unit_rows(cfg_.n_entities, cfg_.dim_video, rng);
    actions_ = random_unit_rows(cfg_.n_actions, cfg_.dim_video, rng);
  }

  const SyntheticWorldConfig& config() const { return cfg_; }
  const Mat& entities() const { return entities_; }
  const Mat& actions() const { return actions_; }
  int action_token(int action) const { return cfg_.n_entities + action; }

  std::vector<GroundingSample> sample(int count, std::uint64_t seed, const std::string& id_prefix = "syn") const {
    std::mt19937_64 rng(seed);
    std::vector<GroundingSample> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) out.push_back(sample_one(rng, id_prefix + "-" + std::to_string(i)));
    return out;
  }

 private:
  int segment_length(std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> frac(cfg_.gt_fraction_min, cfg_.gt_fraction_max);
    const int t = cfg_.num_clips;
    return std::clamp(static_cast<int>(std::lround(frac(rng) * t)), 1, t);
  }

  GroundingSample sample_one(std::mt19937_64& rng, std::string id) const {
    const int t = cfg_.num_clips;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    std::vector<int> pool(static_cast<std::size_t>(cfg_.n_entities));
    std::iota(pool.begin(), pool.end(), 0);
    for (int k = 0; k < cfg_.entities_per_video; ++k) {
      std::uniform_int_distribution<int> pick(k, cfg_.n_entities - 1);
      std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(pick(rng))]);
    }
    std::vector<int> video_entities(pool.begin(), pool.begin() + cfg_.entities_per_video);
    std::sort(video_entities.begin(), video_entities.end());
    const int action = std::uniform_int_distribution<int>(0, cfg_.n_actions - 1)(rng);

    const int gt_len = segment_length(rng);
    const int gt_start = std::uniform_int_distribution<int>(0, t - gt_len)(rng);
    const GroundTruthInterval gt{gt_start, gt_start + gt_len - 1};

    // Optional distractor: the query action performed with other entities,
    // placed in the background. Only the conjunction of entity and action
    // evidence identifies the ground truth.
    int d_start = -1;
    int d_len = 0;
    if (unit(rng) < cfg_.distractor_rate) {
      d_len = segment_length(rng);
      std::vector<int> starts;
      for (int s = 0; s + d_len <= t; ++s) {
        if (s + d_len - 1 < gt.start_clip || s > gt.end_clip) starts.push_back(s);
      }
      if (!starts.empty()) {
        d_start = starts[std::uniform_int_distribution<std::size_t>(0, starts.size() - 1)(rng)];
      }
    }
    const int n_other = std::min(cfg_.entities_per_video, cfg_.n_entities - cfg_.entities_per_video);
    for (int k = 0; k < n_other; ++k) {
      std::uniform_int_distribution<int> pick(cfg_.entities_per_video + k, cfg_.n_entities - 1);
      std::swap(pool[static_cast<std::size_t>(cfg_.entities_per_video + k)], pool[static_cast<std::size_t>(pick(rng))]);
    }
    const std::vector<int> other_entities(pool.begin() + cfg_.entities_per_video,
                                          pool.begin() + cfg_.entities_per_video + n_other);

    GroundingSample s;
    s.video_id = std::move(id);
    s.features = Mat::Zero(t, cfg_.dim_video);
    s.clip_entities.resize(static_cast<std::size_t>(t));
    for (int c = 0; c < t; ++c) {
      const bool in_distractor = d_start >= 0 && c >= d_start && c < d_start + d_len;
      for (int e : in_distractor ? other_entities : video_entities) {
        if (unit(rng) < cfg_.entity_rate) {
          s.features.row(c) += entities_.row(e);
          s.clip_entities[static_cast<std::size_t>(c)].push_back(e);
        }
      }
      if (gt.contains(c) || in_distractor) s.features.row(c) += actions_.row(action);
      if (cfg_.noise_sigma > 0.0) {
        for (int k = 0; k < cfg_.dim_video; ++k) s.features(c, k) += cfg_.noise_sigma * normal(rng);
      }
    }
    s.tokens.tokens = video_entities;
    s.tokens.tokens.push_back(action_token(action));
    s.clip_duration_s = cfg_.clip_duration_s;
    s.gt = gt;
    s.gt_start_s = gt.start_clip * cfg_.clip_duration_s;
    s.gt_end_s = (gt.end_clip + 1) * cfg_.clip_duration_s;
    return s;
  }

  SyntheticWorldConfig cfg_;
  Mat entities_;
  Mat actions_;
};

inline std::vector<GroundingSample> generate_synthetic_dataset(const SyntheticWorldConfig& cfg, int count,
                                                               std::uint64_t seed) {
  const SyntheticWorld world(cfg, seed);
  return world.sample(count, seed ^ 0x9e3779b97f4a7c15ULL);
}

// ---- proposals and the mini grounder ---------------------------------------

struct Proposal {
  int start_clip = 0;
  int end_clip = 0;
  double score = 0.0;

  int length() const { return end_clip - start_clip + 1; }
};

// All (s, e) with 0 <= s <= e < T, ordered by start then end.
inline std::vector<Proposal> enumerate_proposals(int num_clips) {
  if (num_clips < 1) throw ParameterError("enumerate_proposals: need at least one clip");
  std::vector<Proposal> out;
  out.reserve(static_cast<std::size_t>(num_clips) * static_cast<std::size_t>(num_clips + 1) / 2);
  for (int s = 0; s < num_clips; ++s)
    for (int e = s; e < num_clips; ++e) out.push_back(Proposal{s, e, 0.0});
  return out;
}

// logit(p) = s * L_p * (u . (mean_{t in p} x_t (.) y) + b_len) + c, with L_p the
// proposal length in clips: summed per-clip evidence minus a learned per-clip
// threshold, so the span of positive-evidence clips scores highest. The fixed
// scale s plays the role of an inverse temperature on cosine-sized evidence.
struct GrounderParams {
  Vec weight;                // u
  double length_bias = 0.0;  // b_len
  double bias = 0.0;         // c
  double scale = 10.0;       // s, not trained
};

inline constexpr const char* kGrounderWeightKey = "grounder.u";
inline constexpr const char* kGrounderLengthKey = "grounder.len";
inline constexpr const char* kGrounderBiasKey = "grounder.c";

struct ProposalScores {
  std::vector<Proposal> proposals;  // score = sigmoid(logit)
  Vec logits;
};

inline ProposalScores score_proposals(const Mat& clips, const Vec& text, const GrounderParams& g) {
  if (clips.cols() != text.size() || g.weight.size() != text.size()) {
    throw ParameterError("score_proposals: dimension mismatch");
  }
  const int t = static_cast<int>(clips.rows());
  const Vec evidence = clips * g.weight.cwiseProduct(text);
  std::vector<double> prefix(static_cast<std::size_t>(t) + 1, 0.0);
  for (int c = 0; c < t; ++c) prefix[static_cast<std::size_t>(c) + 1] = prefix[static_cast<std::size_t>(c)] + evidence[c];
  ProposalScores out;
  out.proposals = enumerate_proposals(t);
  out.logits.resize(static_cast<Eigen::Index>(out.proposals.size()));
  for (std::size_t k = 0; k < out.proposals.size(); ++k) {
    Proposal& p = out.proposals[k];
    const double sum = prefix[static_cast<std::size_t>(p.end_clip) + 1] - prefix[static_cast<std::size_t>(p.start_clip)];
    const double z = g.scale * (sum + p.length() * g.length_bias) + g.bias;
    out.logits[static_cast<Eigen::Index>(k)] = z;
    p.score = sigmoid(z);
  }
  return out;
}

// target = clamp((IoU - lo) / (hi - lo), 0, 1), IoU in clip units.
inline Vec iou_targets(const std::vector<Proposal>& proposals, const GroundTruthInterval& gt,
                       double lo = 0.5, double hi = 1.0) {
  const Span g{static_cast<double>(gt.start_clip), static_cast<double>(gt.end_clip + 1)};
  Vec out(static_cast<Eigen::Index>(proposals.size()));
  for (std::size_t k = 0; k < proposals.size(); ++k) {
    const Span s{static_cast<double>(proposals[k].start_clip), static_cast<double>(proposals[k].end_clip + 1)};
    out[static_cast<Eigen::Index>(k)] = std::clamp((temporal_iou(s, g) - lo) / (hi - lo), 0.0, 1.0);
  }
  return out;
}

struct BceResult {
  double value = 0.0;  // mean over proposals
  Vec grad_logits;
};

inline BceResult bce_with_logits(const Vec& logits, const Vec& targets) {
  if (logits.size() != targets.size() || logits.size() == 0) throw ParameterError("bce: size mismatch");
  const double inv = 1.0 / static_cast<double>(logits.size());
  BceResult r;
  r.grad_logits.resize(logits.size());
  for (Eigen::Index k = 0; k < logits.size(); ++k) {
    const double z = logits[k];
    const double y = targets[k];
    r.value -= inv * (y * log_sigmoid(z) + (1.0 - y) * log_sigmoid(-z));
    r.grad_logits[k] = inv * (sigmoid(z) - y);
  }
  return r;
}

// Per-proposal BCE on probabilities; used by the metric-only path and tests.
inline double binary_cross_entropy(double score, double target) {
  const double eps = 1e-300;
  return -(target * std::log(std::max(score, eps)) + (1.0 - target) * std::log(std::max(1.0 - score, eps)));
}

// Grounding loss of one video; gradients go to `grad_clips`, `grad_text` and
// the grounder entries of `grads`.
inline double grounding_item_loss(const Mat& clips, const Vec& text, const GroundTruthInterval& gt,
                                  const GrounderParams& g, double weight, Mat& grad_clips, Vec& grad_text,
                                  GradMap& grads) {
  const ProposalScores scores = score_proposals(clips, text, g);
  const Vec targets = iou_targets(scores.proposals, gt);
  const BceResult bce = bce_with_logits(scores.logits, targets);
  const int t = static_cast<int>(clips.rows());
  // d logit / d evidence_t is 1 for every proposal containing t.
  std::vector<double> diff(static_cast<std::size_t>(t) + 1, 0.0);
  double d_len = 0.0;
  double d_bias = 0.0;
  for (std::size_t k = 0; k < scores.proposals.size(); ++k) {
    const Proposal& p = scores.proposals[k];
    const double gz = weight * bce.grad_logits[static_cast<Eigen::Index>(k)];
    d_bias += gz;
    d_len += g.scale * gz * p.length();
    diff[static_cast<std::size_t>(p.start_clip)] += g.scale * gz;
    diff[static_cast<std::size_t>(p.end_clip) + 1] -= g.scale * gz;
  }
  Vec d_evidence(t);
  double run = 0.0;
  for (int c = 0; c < t; ++c) {
    run += diff[static_cast<std::size_t>(c)];
    d_evidence[c] = run;
  }
  const Vec uy = g.weight.cwiseProduct(text);
  grad_clips += d_evidence * uy.transpose();
  const Vec xs = clips.transpose() * d_evidence;
  grad_text += g.weight.cwiseProduct(xs);
  accumulate(grads, kGrounderWeightKey, xs.cwiseProduct(text));
  accumulate(grads, kGrounderLengthKey, Mat::Constant(1, 1, d_len));
  accumulate(grads, kGrounderBiasKey, Mat::Constant(1, 1, d_bias));
  return weight * bce.value;
}

// L^vg: mean over the batch of the per-video mean BCE over all proposals.
inline LossBundle grounding_loss(const EmbeddingBatch& batch, const GrounderParams& g) {
  batch.validate();
  const double w = 1.0 / static_cast<double>(batch.size());
  LossBundle out;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const BatchItem& item = batch.items[i];
    Mat gx = Mat::Zero(item.clips.rows(), item.clips.cols());
    Vec gy = Vec::Zero(item.text.size());
    out.value += grounding_item_loss(item.clips, item.text, item.gt, g, w, gx, gy, out.grads);
    accumulate(out.grads, clip_key(i), gx);
    accumulate(out.grads, text_key(i), gy);
  }
  return out;
}

// ---- NMS and Rank n@m ------------------------------------------------------

struct ScoredSpan {
  Span span;
  double score = 0.0;
};

// Greedy NMS. Ordering: score descending, then earlier start, then shorter,
// then input order. A candidate is dropped when its IoU with any kept span is
// >= threshold.
inline std::vector<ScoredSpan> nms(const std::vector<ScoredSpan>& candidates, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw ParameterError("nms: threshold must be in (0, 1]");
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const ScoredSpan& x = candidates[a];
    const ScoredSpan& y = candidates[b];
    if (x.score != y.score) return x.score > y.score;
    if (x.span.start != y.span.start) return x.span.start < y.span.start;
    return x.span.length() < y.span.length();
  });
  std::vector<ScoredSpan> kept;
  for (std::size_t idx : order) {
    const ScoredSpan& c = candidates[idx];
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const ScoredSpan& k) {
      return temporal_iou(k.span, c.span) >= threshold;
    });
    if (!suppressed) kept.push_back(c);
  }
  return kept;
}

inline std::vector<ScoredSpan> to_scored_spans(const std::vector<Proposal>& proposals, double clip_duration_s) {
  std::vector<ScoredSpan> out;
  out.reserve(proposals.size());
  for (const Proposal& p : proposals) out.push_back({clips_to_span(p.start_clip, p.end_clip, clip_duration_s), p.score});
  return out;
}

inline void validate_rank_params(int n, double m) {
  if (n < 1) throw ParameterError("rank n@m: n must be >= 1");
  if (!(m > 0.0 && m <= 1.0)) throw ParameterError("rank n@m: m must be in (0, 1]");
}

// `ranked` must be sorted by score, best first.
inline bool rank_n_at_m(const std::vector<ScoredSpan>& ranked, const Span& gt, int n, double m) {
  validate_rank_params(n, m);
  const std::size_t top = std::min(ranked.size(), static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < top; ++k) {
    if (temporal_iou(ranked[k].span, gt) >= m) return true;
  }
  return false;
}

struct QueryPrediction {
  std::string video_id;
  std::vector<ScoredSpan> spans;  // ranked, post-NMS
  Span gt;
};

inline double rank_n_at_m_rate(const std::vector<QueryPrediction>& queries, int n, double m) {
  validate_rank_params(n, m);
  if (queries.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& q : queries) hits += rank_n_at_m(q.spans, q.gt, n, m) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(queries.size());
}

// Fraction of similarities >= each threshold.
inline std::vector<double> recall_high_related(const std::vector<double>& similarities,
                                               const std::vector<double>& thresholds) {
  std::vector<double> out;
  out.reserve(thresholds.size());
  for (double th : thresholds) {
    if (similarities.empty()) {
      out.push_back(0.0);
      continue;
    }
    const auto hits = std::count_if(similarities.begin(), similarities.end(), [th](double s) { return s >= th; });
    out.push_back(static_cast<double>(hits) / static_cast<double>(similarities.size()));
  }
  return out;
}

inline const std::vector<double>& default_recall_thresholds() {
  static const std::vector<double> kThresholds = {0.02, 0.04, 0.06};
  return kThresholds;
}

// Mean cosine between text and the clips of `video` (all clips) or of its GT.
inline double mean_clip_text_similarity(const Mat& clips, const Vec& text, const GroundTruthInterval* gt) {
  double sum = 0.0;
  int count = 0;
  for (Eigen::Index t = 0; t < clips.rows(); ++t) {
    if (gt != nullptr && !gt->contains(static_cast<int>(t))) continue;
    sum += cosine_similarity(clips.row(t).transpose(), text);
    ++count;
  }
  return count > 0 ? sum / count : 0.0;
}

// Histogram over (start / duration) x (length / duration), `bins` per axis.
struct IntervalHistogram {
  int bins = 10;
  Mat counts;  // rows: start fraction, cols: duration fraction

  double total() const { return counts.sum(); }
};

inline IntervalHistogram interval_histogram(const std::vector<std::pair<Span, double>>& spans_and_durations,
                                            int bins = 10) {
  if (bins < 1) throw ParameterError("interval_histogram: bins must be positive");
  IntervalHistogram h;
  h.bins = bins;
  h.counts = Mat::Zero(bins, bins);
  for (const auto& [span, duration] : spans_and_durations) {
    const double sf = std::clamp(span.start / duration, 0.0, 1.0);
    const double df = std::clamp(span.length() / duration, 0.0, 1.0);
    const int r = std::min(bins - 1, static_cast<int>(sf * bins));
    const int c = std::min(bins - 1, static_cast<int>(df * bins));
    h.counts(r, c) += 1.0;
  }
  return h;
}

struct RankEntry {
  int n = 1;
  double m = 0.5;
  double rate = 0.0;
};

struct MetricsReport {
  std::vector<RankEntry> ranks;
  std::vector<double> thresholds;
  std::vector<double> recall_video;
  std::vector<double> recall_gt;
  IntervalHistogram histogram;

  double rate(int n, double m) const {
    for (const auto& r : ranks) {
      if (r.n == n && std::abs(r.m - m) < 1e-12) return r.rate;
    }
    throw ParameterError("metrics report has no Rank" + std::to_string(n) + "@" + std::to_string(m));
  }
};

inline MetricsReport metrics_from_predictions(const std::vector<QueryPrediction>& queries,
                                              const std::vector<int>& ns, const std::vector<double>& ms,
                                              const std::vector<double>& durations, int bins = 10) {
  MetricsReport r;
  for (int n : ns)
    for (double m : ms) r.ranks.push_back({n, m, rank_n_at_m_rate(queries, n, m)});
  std::vector<std::pair<Span, double>> hits;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto& q = queries[i];
    if (!q.spans.empty() && temporal_iou(q.spans.front().span, q.gt) >= 0.5) {
      const double d = i < durations.size() ? durations[i] : std::max(q.gt.end, q.spans.front().span.end);
      hits.emplace_back(q.spans.front().span, d);
    }
  }
  r.histogram = interval_histogram(hits, bins);
  return r;
}

// ---- prediction dump (JSON lines) ------------------------------------------

inline nlohmann::json to_json(const QueryPrediction& q) {
  nlohmann::json spans = nlohmann::json::array();
  for (const auto& s : q.spans) spans.push_back({s.span.start, s.span.end, s.score});
  return {{"video_id", q.video_id}, {"spans", spans}, {"gt", {q.gt.start, q.gt.end}}};
}

inline QueryPrediction prediction_from_json(const nlohmann::json& j) {
  QueryPrediction q;
  q.video_id = j.at("video_id").get<std::string>();
  for (const auto& s : j.at("spans")) {
    if (!s.is_array() || s.size() != 3) throw DataError("prediction span must be [start_s, end_s, score]");
    q.spans.push_back({Span{s[0].get<double>(), s[1].get<double>()}, s[2].get<double>()});
  }
  const auto& g = j.at("gt");
  if (!g.is_array() || g.size() != 2) throw DataError("prediction gt must be [start_s, end_s]");
  q.gt = Span{g[0].get<double>(), g[1].get<double>()};
  return q;
}

inline void write_predictions(const std::string& path, const std::vector<QueryPrediction>& queries) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write predictions to " + path);
  for (const auto& q : queries) out << to_json(q).dump() << '\n';
}

inline std::vector<QueryPrediction> read_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open predictions file " + path);
  std::vector<QueryPrediction> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(prediction_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace sscs
