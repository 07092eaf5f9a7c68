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

// Finite-difference verification of every hand-written backward pass: the
// GT-clip and support-set contrastive losses, both caption variants, the
// grounding loss and the full combined objective through all model
// parameters, for every construction x pooling cell.

#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "sscs/grounding.hpp"
#include "sscs/harness/config.hpp"
#include "sscs/harness/model.hpp"
#include "sscs/objectives.hpp"
#include "sscs/support_set.hpp"

namespace sscs {

struct GradCheckOptions {
  int seeds = 100;
  int max_batch = 4;
  int max_clips = 8;
  int t_max = 6;  // below max_clips, so FC/Conv inputs are both padded and truncated
  int dim = 6;
  int vocab = 7;
  double step = 1e-5;
  double tolerance = 1e-4;
};

struct GradCheckResult {
  std::string objective;
  std::string cell;  // "-" for objectives without a support set
  double max_rel_error = 0.0;
  std::uint64_t worst_seed = 0;
  int trials = 0;
};

struct GradCheckSuite {
  std::vector<GradCheckResult> results;
  double tolerance = 1e-4;

  double max_rel_error() const {
    double m = 0.0;
    for (const auto& r : results) m = std::max(m, r.max_rel_error);
    return m;
  }
  bool passed() const { return max_rel_error() < tolerance; }
};

namespace detail {

// Differentiable inputs of one random problem, addressable by gradient key.
struct GradProblem {
  EmbeddingBatch batch;
  std::vector<TokenSequence> sentences;
  PoolingParams pool;
  Affine transform;
  DecoderParams decoder;
  GrounderParams grounder;
  LossWeights weights;

  template <class F>
  void visit(F&& f) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      Mat& x = batch.items[i].clips;
      f(clip_key(i), Eigen::Map<Mat>(x.data(), x.rows(), x.cols()));
      Vec& y = batch.items[i].text;
      f(text_key(i), Eigen::Map<Mat>(y.data(), y.size(), 1));
    }
    f(std::string(kFcWeightKey), Eigen::Map<Mat>(pool.fc_weight.data(), pool.fc_weight.rows(), pool.fc_weight.cols()));
    f(std::string(kFcBiasKey), Eigen::Map<Mat>(pool.fc_bias.data(), pool.fc_bias.size(), 1));
    f(std::string(kConvKernelKey), Eigen::Map<Mat>(pool.conv_kernel.data(), pool.conv_kernel.rows(), pool.conv_kernel.cols()));
    f(std::string(kConvBiasKey), Eigen::Map<Mat>(pool.conv_bias.data(), pool.conv_bias.size(), 1));
    f(std::string(kCaptionWeightKey), Eigen::Map<Mat>(transform.weight.data(), transform.weight.rows(), transform.weight.cols()));
    f(std::string(kCaptionBiasKey), Eigen::Map<Mat>(transform.bias.data(), transform.bias.size(), 1));
    f(std::string(kDecoderWeightKey), Eigen::Map<Mat>(decoder.output.weight.data(), decoder.output.weight.rows(), decoder.output.weight.cols()));
    f(std::string(kDecoderBiasKey), Eigen::Map<Mat>(decoder.output.bias.data(), decoder.output.bias.size(), 1));
    f(std::string(kGrounderWeightKey), Eigen::Map<Mat>(grounder.weight.data(), grounder.weight.size(), 1));
    f(std::string(kGrounderLengthKey), Eigen::Map<Mat>(&grounder.length_bias, 1, 1));
    f(std::string(kGrounderBiasKey), Eigen::Map<Mat>(&grounder.bias, 1, 1));
  }
};

inline bool key_selected(const std::string& key, const std::vector<std::string>& prefixes) {
  return std::any_of(prefixes.begin(), prefixes.end(),
                     [&](const std::string& p) { return key.compare(0, p.size(), p) == 0; });
}

template <class State>
Vec pack(State& s, const std::vector<std::string>& prefixes) {
  std::vector<double> buf;
  s.visit([&](const std::string& k, Eigen::Map<Mat> m) {
    if (key_selected(k, prefixes)) buf.insert(buf.end(), m.data(), m.data() + m.size());
  });
  return Eigen::Map<Vec>(buf.data(), static_cast<Eigen::Index>(buf.size()));
}

template <class State>
void unpack(State& s, const std::vector<std::string>& prefixes, const Vec& flat) {
  Eigen::Index off = 0;
  s.visit([&](const std::string& k, Eigen::Map<Mat> m) {
    if (!key_selected(k, prefixes)) return;
    m = Eigen::Map<const Mat>(flat.data() + off, m.rows(), m.cols());
    off += m.size();
  });
}

// Missing keys stand for zero gradient.
template <class State>
Vec pack_grads(State& s, const std::vector<std::string>& prefixes, const GradMap& grads) {
  std::vector<double> buf;
  s.visit([&](const std::string& k, Eigen::Map<Mat> m) {
    if (!key_selected(k, prefixes)) return;
    const auto it = grads.find(k);
    if (it == grads.end()) {
      buf.insert(buf.end(), static_cast<std::size_t>(m.size()), 0.0);
    } else {
      if (it->second.rows() != m.rows() || it->second.cols() != m.cols()) {
        throw ParameterError("gradient for " + k + " has the wrong shape");
      }
      buf.insert(buf.end(), it->second.data(), it->second.data() + it->second.size());
    }
  });
  return Eigen::Map<Vec>(buf.data(), static_cast<Eigen::Index>(buf.size()));
}

// Relative FD error of `loss` w.r.t. the selected inputs of `state`.
template <class State>
double check_state(const State& state, const std::vector<std::string>& prefixes,
                   const std::function<LossBundle(const State&)>& loss, double h) {
  State work = state;
  const LossBundle analytic = loss(work);
  const Vec x = pack(work, prefixes);
  const Vec a = pack_grads(work, prefixes, analytic.grads);
  const ScalarFn f = [&](const Vec& v) {
    State probe = state;
    unpack(probe, prefixes, v);
    return loss(probe).value;
  };
  return check_gradient(f, x, a, h).max_rel_error;
}

inline Mat gaussian(Eigen::Index r, Eigen::Index c, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, scale);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = n(rng);
  return m;
}

// Max pooling is not differentiable at ties; keep every column's top two
// entries apart by much more than the FD step.
inline bool max_pool_separated(const Mat& rows, double gap) {
  for (Eigen::Index c = 0; c < rows.cols(); ++c) {
    double first = -1e300;
    double second = -1e300;
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
      const double v = rows(r, c);
      if (v > first) {
        second = first;
        first = v;
      } else if (v > second) {
        second = v;
      }
    }
    if (rows.rows() > 1 && first - second < gap) return false;
  }
  return true;
}

inline GradProblem random_problem(std::uint64_t seed, const GradCheckOptions& o) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  GradProblem p;
  const int b = uniform(2, o.max_batch);
  const int d = o.dim;
  p.batch.normalized = (seed % 2) == 0;
  for (int i = 0; i < b; ++i) {
    const int t = uniform(2, o.max_clips);
    const int len = uniform(1, t - 1);  // keep a non-empty background
    const int start = uniform(0, t - len);
    BatchItem item;
    for (;;) {
      item.clips = gaussian(t, d, 0.5, rng);
      if (max_pool_separated(item.clips, 1e-3)) break;
    }
    item.text = gaussian(d, 1, 0.5, rng).col(0);
    item.gt = GroundTruthInterval{start, start + len - 1};
    p.batch.items.push_back(std::move(item));
    TokenSequence s;
    const int words = uniform(1, 4);
    for (int k = 0; k < words; ++k) s.tokens.push_back(uniform(0, o.vocab - 1));
    p.sentences.push_back(std::move(s));
  }
  p.pool.tau = 0.1;
  p.pool.t_max = o.t_max;
  p.pool.conv_width = 3;
  p.pool.fc_weight = gaussian(d, static_cast<Eigen::Index>(o.t_max) * d, 0.2, rng);
  p.pool.fc_bias = gaussian(d, 1, 0.2, rng).col(0);
  p.pool.conv_kernel = gaussian(d, 3 * d, 0.2, rng);
  p.pool.conv_bias = gaussian(d, 1, 0.2, rng).col(0);
  p.transform = Affine{gaussian(d, d, 0.3, rng), gaussian(d, 1, 0.3, rng).col(0)};
  p.decoder.output = Affine{gaussian(o.vocab, d, 0.3, rng), gaussian(o.vocab, 1, 0.3, rng).col(0)};
  p.decoder.token_table = gaussian(o.vocab, 1, 1.0, rng);
  p.grounder.weight = gaussian(d, 1, 0.5, rng).col(0);
  p.grounder.length_bias = std::normal_distribution<double>(0.0, 0.1)(rng);
  p.grounder.bias = std::normal_distribution<double>(0.0, 0.5)(rng);
  p.grounder.scale = 2.0;
  p.weights = LossWeights{0.3, 0.7, 0.1};
  return p;
}

inline std::vector<std::string> pool_keys(PoolingMethod m) {
  if (m == PoolingMethod::kFullyConnected) return {"pool.fc."};
  if (m == PoolingMethod::kConv) return {"pool.conv."};
  return {};
}

inline std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// A tiny end-to-end model and batch for checking the combined objective.
struct ModelProblem {
  ModelParams params;
  ExperimentConfig cfg;
  std::vector<GroundingSample> samples;

  template <class F>
  void visit(F&& f) {
    params.for_each(f);
  }
};

inline ModelProblem random_model_problem(std::uint64_t seed, const GradCheckOptions& o, SupervisionMode mode,
                                         Construction c, PoolingMethod m) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  ModelProblem mp;
  ExperimentConfig& cfg = mp.cfg;
  cfg.mode = mode;
  cfg.support.construction = c;
  cfg.support.pooling = m;
  cfg.dim = o.dim;
  cfg.dim_text = 5;
  cfg.t_max = o.t_max;
  cfg.weights = LossWeights{0.3, 0.7, 0.1};
  cfg.normalize_embeddings = (seed % 2) == 0;
  cfg.world.n_entities = 4;
  cfg.world.n_actions = 3;
  cfg.world.entities_per_video = 1;
  cfg.world.dim_video = 6;
  cfg.world.num_clips = std::uniform_int_distribution<int>(3, o.max_clips)(rng);
  cfg.world.gt_fraction_min = 0.2;
  cfg.world.gt_fraction_max = 0.6;
  const int b = std::uniform_int_distribution<int>(2, o.max_batch)(rng);
  const SyntheticWorld world(cfg.world, seed);
  mp.samples = world.sample(b, seed + 1, "gc");
  mp.params = init_model(cfg, cfg.world.dim_video, seed + 2);
  mp.params.grounder.scale = 2.0;
  // Random rather than unit grounder weights, so no coordinate sits at a
  // structurally special point.
  mp.params.grounder.weight = gaussian(o.dim, 1, 0.5, rng).col(0);
  return mp;
}

inline bool model_max_pool_separated(const ModelProblem& mp) {
  std::vector<const GroundingSample*> ptrs;
  for (const auto& s : mp.samples) ptrs.push_back(&s);
  const ForwardState fwd = forward_embeddings(mp.params, ptrs, mp.cfg.normalize_embeddings);
  for (const auto& item : fwd.batch.items) {
    if (!max_pool_separated(item.clips, 1e-3)) return false;
  }
  return true;
}

}  // namespace detail

using GradCheckProgress = std::function<void(const GradCheckResult&)>;

inline GradCheckSuite run_gradcheck_suite(const GradCheckOptions& o = {}, const GradCheckProgress& progress = {}) {
  using detail::GradProblem;
  using detail::ModelProblem;
  GradCheckSuite suite;
  suite.tolerance = o.tolerance;
  const std::vector<std::string> xy = {"X/", "Y/"};

  auto record = [&](GradCheckResult& r, double err, std::uint64_t seed) {
    if (r.trials == 0 || err > r.max_rel_error) {
      r.max_rel_error = err;
      r.worst_seed = seed;
    }
    ++r.trials;
  };

  // Objectives without a support set.
  GradCheckResult eq2{"gt_contrastive", "-"};
  GradCheckResult eq3{"gt_caption", "-"};
  GradCheckResult vg{"grounding", "-"};
  GradCheckResult eq1_base{"combined_baseline", "-"};
  GradCheckResult eq1_gtc{"combined_gtc", "-"};
  for (int s = 0; s < o.seeds; ++s) {
    const auto seed = static_cast<std::uint64_t>(s);
    const GradProblem p = detail::random_problem(seed, o);
    record(eq2, detail::check_state<GradProblem>(p, xy, [](const GradProblem& q) {
             return gt_clip_contrastive_loss(q.batch, q.weights);
           }, o.step), seed);
    record(eq3, detail::check_state<GradProblem>(p, detail::with(xy, {"caption.", "decoder."}), [](const GradProblem& q) {
             return caption_objective(q.batch, q.sentences, CaptionSource::kGtConcat, nullptr, nullptr, q.transform,
                                      q.decoder);
           }, o.step), seed);
    record(vg, detail::check_state<GradProblem>(p, detail::with(xy, {"grounder."}), [](const GradProblem& q) {
             return grounding_loss(q.batch, q.grounder);
           }, o.step), seed);
    for (auto [mode, slot] : {std::pair{SupervisionMode::kBaseline, &eq1_base}, std::pair{SupervisionMode::kGtc, &eq1_gtc}}) {
      const ModelProblem mp = detail::random_model_problem(seed, o, mode, Construction::kVideo,
                                                           PoolingMethod::kCrossAttention);
      std::vector<std::string> keys;
      ModelProblem probe = mp;
      probe.visit([&](const std::string& k, Eigen::Map<Mat>) {
        if (!detail::key_selected(k, {"pool."})) keys.push_back(k);
      });
      record(*slot, detail::check_state<ModelProblem>(mp, keys, [](const ModelProblem& q) {
               std::vector<const GroundingSample*> ptrs;
               for (const auto& smp : q.samples) ptrs.push_back(&smp);
               return compute_step_loss(q.params, q.cfg, ptrs).total;
             }, o.step), seed);
    }
  }
  for (GradCheckResult* r : {&eq2, &eq3, &vg, &eq1_base, &eq1_gtc}) {
    suite.results.push_back(*r);
    if (progress) progress(*r);
  }

  // Support-set objectives, per grid cell.
  for (Construction c : kAllConstructions) {
    for (PoolingMethod m : kAllPoolingMethods) {
      const std::string cell = to_string(c) + "+" + to_string(m);
      GradCheckResult eq6{"support_contrastive", cell};
      GradCheckResult eq7{"support_caption", cell};
      GradCheckResult eq1{"combined_ss", cell};
      const auto pk = detail::pool_keys(m);
      for (int s = 0; s < o.seeds; ++s) {
        const auto seed = static_cast<std::uint64_t>(s);
        GradProblem p = detail::random_problem(seed, o);
        p.pool.method = m;
        record(eq6, detail::check_state<GradProblem>(p, detail::with(xy, pk), [c](const GradProblem& q) {
                 const auto pooled = pool_batch(q.batch, c, q.pool);
                 return support_contrastive_loss(pooled, q.batch, q.pool, q.weights);
               }, o.step), seed);
        record(eq7, detail::check_state<GradProblem>(p, detail::with(detail::with(xy, pk), {"decoder."}),
                                                     [c](const GradProblem& q) {
                 const auto pooled = pool_batch(q.batch, c, q.pool);
                 return caption_objective(q.batch, q.sentences, CaptionSource::kSupportPooled, &pooled, &q.pool,
                                          q.transform, q.decoder);
               }, o.step), seed);

        ModelProblem mp = detail::random_model_problem(seed, o, SupervisionMode::kSs, c, m);
        for (std::uint64_t retry = 1; m == PoolingMethod::kMaxPool && !detail::model_max_pool_separated(mp); ++retry) {
          mp = detail::random_model_problem(seed + 1000003ULL * retry, o, SupervisionMode::kSs, c, m);
        }
        std::vector<std::string> keys;
        mp.visit([&](const std::string& k, Eigen::Map<Mat>) {
          if (!detail::key_selected(k, {"pool."}) || detail::key_selected(k, pk)) keys.push_back(k);
        });
        record(eq1, detail::check_state<ModelProblem>(mp, keys, [](const ModelProblem& q) {
                 std::vector<const GroundingSample*> ptrs;
                 for (const auto& smp : q.samples) ptrs.push_back(&smp);
                 return compute_step_loss(q.params, q.cfg, ptrs).total;
               }, o.step), seed);
      }
      for (GradCheckResult* r : {&eq6, &eq7, &eq1}) {
        suite.results.push_back(*r);
        if (progress) progress(*r);
      }
    }
  }
  return suite;
}

}  // namespace sscs
