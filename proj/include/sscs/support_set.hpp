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

// Support-set construction (which clips of a video are pooled) and the six
// pooling functions that map a support set to one embedding w_bar.
//
// Clip sequences are matrices with one clip embedding per row.

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sscs/grad_map.hpp"
#include "sscs/numerics.hpp"

namespace sscs {

enum class Construction { kVideo, kGroundTruth, kNonGroundTruth };
enum class PoolingMethod { kCrossAttention, kSelfAttention, kFullyConnected, kConv, kMaxPool, kAvgPool };

inline constexpr std::array<Construction, 3> kAllConstructions = {
    Construction::kVideo, Construction::kGroundTruth, Construction::kNonGroundTruth};
inline constexpr std::array<PoolingMethod, 6> kAllPoolingMethods = {
    PoolingMethod::kCrossAttention, PoolingMethod::kSelfAttention, PoolingMethod::kFullyConnected,
    PoolingMethod::kConv,           PoolingMethod::kMaxPool,       PoolingMethod::kAvgPool};

namespace detail {
inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}
}  // namespace detail

inline std::string to_string(Construction c) {
  switch (c) {
    case Construction::kVideo: return "V-SS";
    case Construction::kGroundTruth: return "GT-SS";
    case Construction::kNonGroundTruth: return "Non-GT-SS";
  }
  return "?";
}

inline std::string to_string(PoolingMethod m) {
  switch (m) {
    case PoolingMethod::kCrossAttention: return "CA";
    case PoolingMethod::kSelfAttention: return "SA";
    case PoolingMethod::kFullyConnected: return "FC";
    case PoolingMethod::kConv: return "Conv";
    case PoolingMethod::kMaxPool: return "MP";
    case PoolingMethod::kAvgPool: return "AP";
  }
  return "?";
}

// Accepts the canonical names case-insensitively ("V-SS", "v-ss", ...).
inline Construction parse_construction(std::string_view s) {
  for (auto c : kAllConstructions) {
    if (detail::lower(to_string(c)) == detail::lower(s)) return c;
  }
  throw ParameterError("unknown support-set construction: " + std::string(s));
}

inline PoolingMethod parse_pooling(std::string_view s) {
  for (auto m : kAllPoolingMethods) {
    if (detail::lower(to_string(m)) == detail::lower(s)) return m;
  }
  throw ParameterError("unknown pooling method: " + std::string(s));
}

inline bool has_attention(PoolingMethod m) {
  return m == PoolingMethod::kCrossAttention || m == PoolingMethod::kSelfAttention;
}

inline bool is_parametric(PoolingMethod m) {
  return m == PoolingMethod::kFullyConnected || m == PoolingMethod::kConv;
}

// Inclusive clip-index interval.
struct GroundTruthInterval {
  int start_clip = 0;
  int end_clip = 0;

  int length() const { return end_clip - start_clip + 1; }
  bool contains(int t) const { return t >= start_clip && t <= end_clip; }

  void validate(int num_clips) const {
    if (start_clip < 0 || start_clip > end_clip || end_clip >= num_clips) {
      throw ParameterError("invalid ground-truth interval [" + std::to_string(start_clip) + ", " +
                           std::to_string(end_clip) + "] for " + std::to_string(num_clips) +
                           " clips");
    }
  }

  friend bool operator==(const GroundTruthInterval&, const GroundTruthInterval&) = default;
};

struct SupportSet {
  std::vector<int> clip_indices;  // sorted, unique
  Construction construction = Construction::kVideo;

  std::size_t size() const { return clip_indices.size(); }
};

inline SupportSet build_support_set(int num_clips, const GroundTruthInterval& gt,
                                    Construction construction) {
  if (num_clips < 1) throw ParameterError("build_support_set: video has no clips");
  gt.validate(num_clips);
  SupportSet s;
  s.construction = construction;
  for (int t = 0; t < num_clips; ++t) {
    const bool inside = gt.contains(t);
    const bool keep = construction == Construction::kVideo ||
                      (construction == Construction::kGroundTruth && inside) ||
                      (construction == Construction::kNonGroundTruth && !inside);
    if (keep) s.clip_indices.push_back(t);
  }
  if (s.clip_indices.empty()) {
    throw DataError("build_support_set: Non-GT support set is empty (ground truth covers all " +
                    std::to_string(num_clips) + " clips)");
  }
  return s;
}

inline Mat gather_rows(const Mat& x, const std::vector<int>& rows) {
  Mat out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = x.row(rows[k]);
  return out;
}

struct PooledEmbedding {
  Vec w_bar;
  std::optional<ProbabilityVec> attention;  // CA and SA only
};

struct SelfAttentionIntermediate {
  Mat similarity;  // Q, clip-by-clip
  Vec row_sums;    // z
};

// Shapes: FC weight is D x (t_max * D) acting on the clips flattened in
// index order; the conv kernel is D x (width * D), one D x D block per tap.
struct PoolingParams {
  PoolingMethod method = PoolingMethod::kCrossAttention;
  double tau = 0.1;
  int t_max = 16;
  int conv_width = 3;
  Mat fc_weight;
  Vec fc_bias;
  Mat conv_kernel;
  Vec conv_bias;
};

inline constexpr const char* kFcWeightKey = "pool.fc.W";
inline constexpr const char* kFcBiasKey = "pool.fc.b";
inline constexpr const char* kConvKernelKey = "pool.conv.K";
inline constexpr const char* kConvBiasKey = "pool.conv.b";

// Gradients of one pooling call. `clips` is aligned with the pooled rows.
struct PoolingGrad {
  Mat clips;
  Vec query;  // zero unless the method reads the text embedding (CA)
  GradMap params;
};

// ---- cross-attention -------------------------------------------------------

inline PooledEmbedding pool_cross_attention(const Mat& clips, const Vec& y, double tau) {
  if (clips.rows() < 1) throw ParameterError("pool_cross_attention: empty support set");
  Vec sims(clips.rows());
  for (Eigen::Index t = 0; t < clips.rows(); ++t) sims[t] = cosine_similarity(clips.row(t).transpose(), y);
  ProbabilityVec a = stable_softmax(sims, tau);
  PooledEmbedding out;
  out.w_bar = clips.transpose() * a.values;
  out.attention = std::move(a);
  return out;
}

inline PoolingGrad pool_cross_attention_backward(const Mat& clips, const Vec& y, double tau,
                                                 const PooledEmbedding& pooled,
                                                 const Vec& grad_wbar) {
  const ProbabilityVec& a = *pooled.attention;
  PoolingGrad g;
  g.clips = a.values * grad_wbar.transpose();
  g.query = Vec::Zero(y.size());
  const Vec grad_a = clips * grad_wbar;
  const Vec grad_sims = softmax_backward(a, grad_a, tau);
  for (Eigen::Index t = 0; t < clips.rows(); ++t) {
    const CosineGrad cg = cosine_similarity_backward(clips.row(t).transpose(), y, grad_sims[t]);
    g.clips.row(t) += cg.da.transpose();
    g.query += cg.db;
  }
  return g;
}

// ---- self-attention --------------------------------------------------------

// Q = S S^T / tau is clip-by-clip, so each z_t sums a length-n row.
inline PooledEmbedding pool_self_attention(const Mat& clips, double tau,
                                           SelfAttentionIntermediate* intermediate = nullptr) {
  if (clips.rows() < 1) throw ParameterError("pool_self_attention: empty support set");
  if (!(tau > 0.0)) throw ParameterError("pool_self_attention: temperature must be positive");
  Mat q = clips * clips.transpose() / tau;
  Vec z = q.rowwise().sum();
  ProbabilityVec a = stable_softmax(z, 1.0);
  PooledEmbedding out;
  out.w_bar = clips.transpose() * a.values;
  out.attention = std::move(a);
  if (intermediate != nullptr) {
    intermediate->similarity = std::move(q);
    intermediate->row_sums = std::move(z);
  }
  return out;
}

inline PoolingGrad pool_self_attention_backward(const Mat& clips, double tau,
                                                const PooledEmbedding& pooled,
                                                const Vec& grad_wbar) {
  const ProbabilityVec& a = *pooled.attention;
  PoolingGrad g;
  g.query = Vec();
  g.clips = a.values * grad_wbar.transpose();
  const Vec grad_z = softmax_backward(a, clips * grad_wbar, 1.0);
  // z_t = x_t . s / tau with s the sum of all clips.
  const Vec s = clips.colwise().sum().transpose();
  g.clips += grad_z * s.transpose() / tau;
  const Vec back = clips.transpose() * grad_z / tau;
  g.clips.rowwise() += back.transpose();
  return g;
}

// ---- parametric (FC / Conv) ------------------------------------------------

// Zero-pads or truncates to exactly t_max rows.
inline Mat pad_or_truncate(const Mat& clips, int t_max) {
  Mat out = Mat::Zero(t_max, clips.cols());
  const Eigen::Index n = std::min<Eigen::Index>(clips.rows(), t_max);
  out.topRows(n) = clips.topRows(n);
  return out;
}

inline void validate_parametric(const Mat& clips, const PoolingParams& p) {
  const Eigen::Index d = clips.cols();
  if (p.method == PoolingMethod::kFullyConnected) {
    if (clips.rows() != p.t_max) {
      throw ParameterError("pool_parametric: FC expects exactly t_max=" + std::to_string(p.t_max) +
                           " clips, got " + std::to_string(clips.rows()));
    }
    if (p.fc_weight.rows() != p.fc_bias.size() || p.fc_weight.cols() != p.t_max * d) {
      throw ParameterError("pool_parametric: FC weight shape does not map (t_max*D) -> D");
    }
  } else if (p.method == PoolingMethod::kConv) {
    if (clips.rows() < 1) throw ParameterError("pool_parametric: empty support set");
    if (p.conv_width < 1 || p.conv_width % 2 == 0) {
      throw ParameterError("pool_parametric: conv width must be odd");
    }
    if (p.conv_kernel.cols() != p.conv_width * d || p.conv_kernel.rows() != p.conv_bias.size()) {
      throw ParameterError("pool_parametric: conv kernel shape does not map (T x D) -> D");
    }
  } else {
    throw ParameterError("pool_parametric: method must be FC or Conv");
  }
}

inline PooledEmbedding pool_parametric(const Mat& clips, const PoolingParams& p) {
  validate_parametric(clips, p);
  PooledEmbedding out;
  if (p.method == PoolingMethod::kFullyConnected) {
    // Row-major flattening: clip 0 first.
    const Mat rows = clips.transpose();
    out.w_bar = p.fc_weight * flatten(rows) + p.fc_bias;
    return out;
  }
  const Eigen::Index n = clips.rows();
  const Eigen::Index d = clips.cols();
  const int half = p.conv_width / 2;
  // Mean over positions of sum_k K_k x_{pos+k-half}; each tap sees the clip
  // sum over the positions that reach it.
  Vec acc = Vec::Zero(p.conv_kernel.rows());
  for (int k = 0; k < p.conv_width; ++k) {
    Vec tap_sum = Vec::Zero(d);
    for (Eigen::Index pos = 0; pos < n; ++pos) {
      const Eigen::Index src = pos + k - half;
      if (src >= 0 && src < n) tap_sum += clips.row(src).transpose();
    }
    acc += p.conv_kernel.middleCols(k * d, d) * tap_sum;
  }
  out.w_bar = acc / static_cast<double>(n) + p.conv_bias;
  return out;
}

inline PoolingGrad pool_parametric_backward(const Mat& clips, const PoolingParams& p,
                                            const Vec& grad_wbar) {
  validate_parametric(clips, p);
  PoolingGrad g;
  const Eigen::Index n = clips.rows();
  const Eigen::Index d = clips.cols();
  if (p.method == PoolingMethod::kFullyConnected) {
    const Mat rows = clips.transpose();
    g.params[kFcWeightKey] = grad_wbar * flatten(rows).transpose();
    g.params[kFcBiasKey] = grad_wbar;
    const Vec flat = p.fc_weight.transpose() * grad_wbar;
    g.clips = unflatten(flat, d, n).transpose();
    return g;
  }
  const int half = p.conv_width / 2;
  const Vec scaled = grad_wbar / static_cast<double>(n);
  Mat dk = Mat::Zero(p.conv_kernel.rows(), p.conv_kernel.cols());
  g.clips = Mat::Zero(n, d);
  for (int k = 0; k < p.conv_width; ++k) {
    Vec tap_sum = Vec::Zero(d);
    const Vec back = p.conv_kernel.middleCols(k * d, d).transpose() * scaled;
    for (Eigen::Index pos = 0; pos < n; ++pos) {
      const Eigen::Index src = pos + k - half;
      if (src >= 0 && src < n) {
        tap_sum += clips.row(src).transpose();
        g.clips.row(src) += back.transpose();
      }
    }
    dk.middleCols(k * d, d) = scaled * tap_sum.transpose();
  }
  g.params[kConvKernelKey] = dk;
  g.params[kConvBiasKey] = grad_wbar;
  return g;
}

// ---- reductions (MP / AP) --------------------------------------------------

inline PooledEmbedding pool_reduce(const Mat& clips, PoolingMethod method) {
  if (clips.rows() < 1) throw ParameterError("pool_reduce: empty support set");
  PooledEmbedding out;
  if (method == PoolingMethod::kMaxPool) {
    out.w_bar = clips.colwise().maxCoeff().transpose();
  } else if (method == PoolingMethod::kAvgPool) {
    out.w_bar = clips.colwise().mean().transpose();
  } else {
    throw ParameterError("pool_reduce: method must be MP or AP");
  }
  return out;
}

inline PoolingGrad pool_reduce_backward(const Mat& clips, PoolingMethod method, const Vec& grad_wbar) {
  PoolingGrad g;
  g.clips = Mat::Zero(clips.rows(), clips.cols());
  if (method == PoolingMethod::kAvgPool) {
    g.clips.rowwise() = (grad_wbar / static_cast<double>(clips.rows())).transpose();
    return g;
  }
  // Ties route to the first maximal clip.
  for (Eigen::Index c = 0; c < clips.cols(); ++c) {
    Eigen::Index arg = 0;
    clips.col(c).maxCoeff(&arg);
    g.clips(arg, c) = grad_wbar[c];
  }
  return g;
}

// ---- dispatch over a support set of one video ------------------------------

// Rows of `video` selected by `support`, pooled with `params`. FC/Conv see
// the support clips padded or truncated to t_max; the other methods see the
// true support length.
inline Mat support_input(const Mat& video, const SupportSet& support, const PoolingParams& params) {
  Mat clips = gather_rows(video, support.clip_indices);
  if (params.method == PoolingMethod::kFullyConnected) return pad_or_truncate(clips, params.t_max);
  if (params.method == PoolingMethod::kConv && clips.rows() > params.t_max) {
    return pad_or_truncate(clips, params.t_max);
  }
  return clips;
}

inline PooledEmbedding pool_support(const Mat& video, const Vec& y, const SupportSet& support,
                                    const PoolingParams& params) {
  const Mat clips = support_input(video, support, params);
  switch (params.method) {
    case PoolingMethod::kCrossAttention: return pool_cross_attention(clips, y, params.tau);
    case PoolingMethod::kSelfAttention: return pool_self_attention(clips, params.tau);
    case PoolingMethod::kFullyConnected:
    case PoolingMethod::kConv: return pool_parametric(clips, params);
    case PoolingMethod::kMaxPool:
    case PoolingMethod::kAvgPool: return pool_reduce(clips, params.method);
  }
  throw ParameterError("pool_support: unknown method");
}

// Gradient with respect to the full video matrix (zero outside the support),
// the query and any pooling parameters.
inline PoolingGrad pool_support_backward(const Mat& video, const Vec& y, const SupportSet& support,
                                         const PoolingParams& params, const PooledEmbedding& pooled,
                                         const Vec& grad_wbar) {
  const Mat clips = support_input(video, support, params);
  PoolingGrad local;
  switch (params.method) {
    case PoolingMethod::kCrossAttention:
      local = pool_cross_attention_backward(clips, y, params.tau, pooled, grad_wbar);
      break;
    case PoolingMethod::kSelfAttention:
      local = pool_self_attention_backward(clips, params.tau, pooled, grad_wbar);
      break;
    case PoolingMethod::kFullyConnected:
    case PoolingMethod::kConv: local = pool_parametric_backward(clips, params, grad_wbar); break;
    case PoolingMethod::kMaxPool:
    case PoolingMethod::kAvgPool: local = pool_reduce_backward(clips, params.method, grad_wbar); break;
  }
  PoolingGrad g;
  g.clips = Mat::Zero(video.rows(), video.cols());
  const Eigen::Index used = std::min<Eigen::Index>(local.clips.rows(),
                                                   static_cast<Eigen::Index>(support.size()));
  for (Eigen::Index k = 0; k < used; ++k) g.clips.row(support.clip_indices[k]) = local.clips.row(k);
  g.query = local.query.size() == y.size() ? local.query : Vec::Zero(y.size());
  g.params = std::move(local.params);
  return g;
}

}  // namespace sscs
