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

// Report files for a trained model on a held-out split: support-pooled
// similarity matrix, similarity recall, the start x duration histogram of
// successful predictions, Rank n@m table and the raw prediction dump.

#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sscs/errors.hpp"
#include "sscs/grounding.hpp"
#include "sscs/harness/config.hpp"
#include "sscs/harness/evaluation.hpp"
#include "sscs/harness/model.hpp"

namespace sscs {

inline std::string matrix_csv(const Mat& m) {
  std::ostringstream os;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) os << ',';
      os << format_double(m(r, c));
    }
    os << '\n';
  }
  return os.str();
}

inline std::string recall_csv(const MetricsReport& r) {
  std::ostringstream os;
  os << "threshold,recall_video,recall_gt\n";
  for (std::size_t k = 0; k < r.thresholds.size(); ++k) {
    os << format_double(r.thresholds[k]) << ',' << format_double(r.recall_video.at(k)) << ','
       << format_double(r.recall_gt.at(k)) << '\n';
  }
  return os.str();
}

// Rows are start-fraction bins, columns duration-fraction bins.
inline std::string histogram_csv(const IntervalHistogram& h) {
  std::ostringstream os;
  os << "start_bin";
  for (int c = 0; c < h.bins; ++c) os << ",dur_" << c;
  os << '\n';
  for (int r = 0; r < h.bins; ++r) {
    os << r;
    for (int c = 0; c < h.bins; ++c) os << ',' << format_double(h.counts(r, c));
    os << '\n';
  }
  return os.str();
}

inline std::string ranks_csv(const MetricsReport& r) {
  std::ostringstream os;
  os << "n,m,rate\n";
  for (const auto& e : r.ranks) os << e.n << ',' << format_double(e.m) << ',' << format_double(e.rate) << '\n';
  return os.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

struct ReportOptions {
  int matrix_size = 16;  // videos/texts in the similarity matrix
};

// Writes similarity.csv, recall.csv, histogram.csv, ranks.csv and
// predictions.jsonl into out_dir; returns the written paths.
inline std::vector<std::filesystem::path> emit_reports(const ModelParams& p, const ExperimentConfig& cfg,
                                                       const std::vector<GroundingSample>& samples,
                                                       const std::filesystem::path& out_dir,
                                                       const ReportOptions& opts = {}) {
  if (samples.empty()) throw DataError("emit_reports: no samples");
  std::filesystem::create_directories(out_dir);
  const Evaluation ev = evaluate_model(p, cfg, samples);

  std::vector<const GroundingSample*> head;
  const std::size_t n = std::min(samples.size(), static_cast<std::size_t>(std::max(opts.matrix_size, 1)));
  for (std::size_t i = 0; i < n; ++i) head.push_back(&samples[i]);

  const std::vector<std::filesystem::path> paths = {out_dir / "similarity.csv", out_dir / "recall.csv",
                                                    out_dir / "histogram.csv", out_dir / "ranks.csv",
                                                    out_dir / "predictions.jsonl"};
  write_text_file(paths[0], matrix_csv(similarity_matrix(p, cfg, head)));
  write_text_file(paths[1], recall_csv(ev.metrics));
  write_text_file(paths[2], histogram_csv(ev.metrics.histogram));
  write_text_file(paths[3], ranks_csv(ev.metrics));
  write_predictions(paths[4].string(), ev.predictions);
  return paths;
}

}  // namespace sscs
