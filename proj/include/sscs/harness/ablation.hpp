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

// Ablation runner: trains one model per (cell, seed) and tabulates held-out
// Rank n@m, averaged over seeds. A cell that cannot run (for example a
// Non-GT support set on a video whose GT covers every clip) becomes a row
// with an error message; the remaining cells still run.

#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sscs/harness/evaluation.hpp"
#include "sscs/harness/trainer.hpp"

namespace sscs {

struct AblationCell {
  SupervisionMode mode = SupervisionMode::kBaseline;
  bool contrast = false;
  bool caption = false;
  Construction construction = Construction::kVideo;
  PoolingMethod pooling = PoolingMethod::kCrossAttention;

  std::string label() const {
    std::string s = to_string(mode);
    if (mode == SupervisionMode::kBaseline) return s;
    s += std::string(contrast ? "+contrast" : "") + (caption ? "+caption" : "");
    if (mode == SupervisionMode::kSs) s += " " + to_string(construction) + "+" + to_string(pooling);
    return s;
  }

  void apply(ExperimentConfig& cfg) const {
    cfg.mode = mode;
    cfg.use_contrast = contrast;
    cfg.use_caption = caption;
    cfg.support.construction = construction;
    cfg.support.pooling = pooling;
  }
};

// Baseline followed by the four (contrast, caption) toggles of one mode.
inline std::vector<AblationCell> toggle_grid(SupervisionMode mode, Construction c = Construction::kVideo,
                                             PoolingMethod p = PoolingMethod::kCrossAttention) {
  std::vector<AblationCell> cells{{SupervisionMode::kBaseline, false, false, c, p}};
  for (bool con : {false, true})
    for (bool cap : {false, true}) cells.push_back({mode, con, cap, c, p});
  return cells;
}

// Baseline, then GTC and SS each with contrast only, caption only, both.
inline std::vector<AblationCell> supervision_grid(Construction c = Construction::kVideo,
                                                  PoolingMethod p = PoolingMethod::kCrossAttention) {
  std::vector<AblationCell> cells{{SupervisionMode::kBaseline, false, false, c, p}};
  for (auto mode : {SupervisionMode::kGtc, SupervisionMode::kSs}) {
    cells.push_back({mode, true, false, c, p});
    cells.push_back({mode, false, true, c, p});
    cells.push_back({mode, true, true, c, p});
  }
  return cells;
}

// Every construction x pooling pair under SS with both objectives.
inline std::vector<AblationCell> support_set_grid() {
  std::vector<AblationCell> cells;
  for (auto c : kAllConstructions)
    for (auto p : kAllPoolingMethods) cells.push_back({SupervisionMode::kSs, true, true, c, p});
  return cells;
}

struct AblationRow {
  AblationCell cell;
  std::vector<RankEntry> ranks;  // averaged over seeds
  int seeds = 0;
  std::string error;
};

struct AblationTable {
  std::vector<AblationRow> rows;

  std::string to_csv() const {
    std::ostringstream os;
    os << "model,mode,contrast,caption,construction,pooling,seeds";
    if (!rows.empty()) {
      for (const auto& r : rows) {
        if (!r.ranks.empty()) {
          for (const auto& e : r.ranks) os << ",R" << e.n << "@" << format_double(e.m);
          break;
        }
      }
    }
    os << ",error\n";
    std::size_t width = 0;
    for (const auto& r : rows) width = std::max(width, r.ranks.size());
    for (const auto& r : rows) {
      os << '"' << r.cell.label() << "\"," << to_string(r.cell.mode) << ',' << r.cell.contrast << ',' << r.cell.caption
         << ',' << to_string(r.cell.construction) << ',' << to_string(r.cell.pooling) << ',' << r.seeds;
      for (std::size_t k = 0; k < width; ++k) {
        os << ',';
        if (k < r.ranks.size()) os << format_double(r.ranks[k].rate);
      }
      os << ",\"" << r.error << "\"\n";
    }
    return os.str();
  }
};

// Progress hook: (cell index, seed, metrics) after each finished run.
using AblationProgress = std::function<void(std::size_t, std::uint64_t, const MetricsReport&)>;

inline AblationTable run_ablation(const ExperimentConfig& base, const std::vector<AblationCell>& cells,
                                  const std::vector<std::uint64_t>& seeds, const AblationProgress& progress = {}) {
  AblationTable table;
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    AblationRow row;
    row.cell = cells[ci];
    try {
      for (std::uint64_t seed : seeds) {
        ExperimentConfig cfg = base;
        cells[ci].apply(cfg);
        cfg.seed = seed;
        const Dataset data = build_dataset(cfg);
        Trainer trainer(cfg, data);
        trainer.run();
        const Evaluation ev = evaluate_model(trainer.params(), cfg, data.test);
        if (row.ranks.empty()) {
          row.ranks = ev.metrics.ranks;
          for (auto& e : row.ranks) e.rate = 0.0;
        }
        for (std::size_t k = 0; k < row.ranks.size(); ++k) row.ranks[k].rate += ev.metrics.ranks[k].rate;
        ++row.seeds;
        if (progress) progress(ci, seed, ev.metrics);
      }
      for (auto& e : row.ranks) e.rate /= row.seeds;
    } catch (const Error& e) {
      row.error = e.what();
      row.ranks.clear();
      row.seeds = 0;
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace sscs
