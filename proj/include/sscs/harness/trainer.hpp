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

// Training loop: seeded epoch shuffles, per-mode loss composition, Adam and
// plateau-based learning-rate decay on the validation loss.

#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sscs/harness/checkpoint.hpp"
#include "sscs/harness/config.hpp"
#include "sscs/harness/evaluation.hpp"
#include "sscs/harness/ingest.hpp"
#include "sscs/harness/model.hpp"
#include "sscs/harness/optim.hpp"

namespace sscs {

struct Dataset {
  std::vector<GroundingSample> train;
  std::vector<GroundingSample> val;
  std::vector<GroundingSample> test;
  int dim_video = 0;
};

// Synthetic: one world per seed, three independent sample streams.
// Manifest: the last n_test samples are the test split, the n_val before
// them validation, the rest training.
inline Dataset build_dataset(const ExperimentConfig& cfg) {
  Dataset d;
  if (cfg.dataset == DatasetSource::kSynthetic) {
    const SyntheticWorld world(cfg.world, cfg.seed);
    d.train = world.sample(cfg.n_train, cfg.seed * 3 + 1, "train");
    d.val = world.sample(cfg.n_val, cfg.seed * 3 + 2, "val");
    d.test = world.sample(cfg.n_test, cfg.seed * 3 + 3, "test");
    d.dim_video = cfg.world.dim_video;
    return d;
  }
  std::vector<GroundingSample> all = ingest_features(cfg.manifest);
  if (all.empty()) throw DataError("manifest " + cfg.manifest + " has no samples");
  d.dim_video = static_cast<int>(all.front().features.cols());
  for (const auto& s : all) {
    if (s.features.cols() != d.dim_video) throw DataError("sample " + s.video_id + ": inconsistent D_v");
  }
  const auto n = static_cast<long>(all.size());
  const long n_test = std::min<long>(cfg.n_test, n);
  const long n_val = std::min<long>(cfg.n_val, n - n_test);
  const long n_train = n - n_test - n_val;
  if (n_train < cfg.batch_size) throw DataError("manifest has too few samples for one training batch");
  d.train.assign(all.begin(), all.begin() + n_train);
  d.val.assign(all.begin() + n_train, all.begin() + n_train + n_val);
  d.test.assign(all.begin() + n_train + n_val, all.end());
  return d;
}

struct TrainLogRow {
  long long step = 0;  // number of completed updates
  double lr = 0.0;
  double total = 0.0;
  double grounding = 0.0;
  double contrast = 0.0;
  double caption = 0.0;
  std::optional<double> val_loss;
  std::optional<double> val_rank1;  // Rank1@0.5 on the validation split
};

inline std::string train_log_header() { return "step,lr,total,grounding,contrast,caption,val_loss,val_rank1_0.5"; }

inline std::string to_csv(const TrainLogRow& r) {
  std::ostringstream os;
  os << r.step << ',' << format_double(r.lr) << ',' << format_double(r.total) << ',' << format_double(r.grounding)
     << ',' << format_double(r.contrast) << ',' << format_double(r.caption) << ',';
  if (r.val_loss) os << format_double(*r.val_loss);
  os << ',';
  if (r.val_rank1) os << format_double(*r.val_rank1);
  return os.str();
}

class Trainer {
 public:
  Trainer(ExperimentConfig cfg, const Dataset& data) : cfg_(std::move(cfg)), data_(data) {
    cfg_.validate();
    ck_.params = init_model(cfg_, data_.dim_video, cfg_.seed);
    ck_.scheduler = make_scheduler();
    ck_.config_hash = config_hash(cfg_);
  }

  Trainer(ExperimentConfig cfg, const Dataset& data, Checkpoint resume) : cfg_(std::move(cfg)), data_(data) {
    cfg_.validate();
    ck_ = std::move(resume);
    const PlateauScheduler fresh = make_scheduler();
    ck_.scheduler.factor = fresh.factor;
    ck_.scheduler.patience = fresh.patience;
  }

  // Validation Rank1@0.5 is computed at every evaluation point when enabled.
  void set_track_val_rank(bool on) { track_val_rank_ = on; }
  void set_log_callback(std::function<void(const TrainLogRow&)> cb) { on_log_ = std::move(cb); }

  const ExperimentConfig& config() const { return cfg_; }
  const Checkpoint& checkpoint() const { return ck_; }
  const ModelParams& params() const { return ck_.params; }
  long long step() const { return ck_.step; }
  const std::vector<TrainLogRow>& log() const { return log_; }

  std::vector<const GroundingSample*> batch_for_step(long long step) {
    const auto n = static_cast<long long>(data_.train.size());
    const long long per_epoch = n / cfg_.batch_size;
    const long long epoch = step / per_epoch;
    const long long pos = step % per_epoch;
    if (epoch != cached_epoch_) {
      order_.resize(static_cast<std::size_t>(n));
      std::iota(order_.begin(), order_.end(), std::size_t{0});
      std::mt19937_64 rng(cfg_.seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(epoch) + 17);
      std::shuffle(order_.begin(), order_.end(), rng);
      cached_epoch_ = epoch;
    }
    std::vector<const GroundingSample*> batch;
    for (int k = 0; k < cfg_.batch_size; ++k) {
      batch.push_back(&data_.train[order_[static_cast<std::size_t>(pos * cfg_.batch_size + k)]]);
    }
    return batch;
  }

  double validation_loss() const {
    if (data_.val.empty()) return 0.0;
    double sum = 0.0;
    int chunks = 0;
    const auto b = static_cast<std::size_t>(cfg_.batch_size);
    for (std::size_t start = 0; start < data_.val.size(); start += b) {
      std::vector<const GroundingSample*> chunk;
      for (std::size_t k = start; k < std::min(data_.val.size(), start + b); ++k) chunk.push_back(&data_.val[k]);
      sum += compute_step_loss(ck_.params, cfg_, chunk).total.value;
      ++chunks;
    }
    return sum / chunks;
  }

  void train_step() {
    const auto batch = batch_for_step(ck_.step);
    StepLoss loss = compute_step_loss(ck_.params, cfg_, batch);
    if (!std::isfinite(loss.total.value)) {
      std::ostringstream os;
      os << "training diverged at step " << ck_.step << ": total=" << loss.total.value << " grounding=" << loss.grounding
         << " contrast=" << loss.contrast << " caption=" << loss.caption << " lr=" << ck_.scheduler.lr;
      throw NumericError(os.str());
    }
    ck_.adam.step(ck_.params, loss.total.grads, ck_.scheduler.lr);
    ++ck_.step;
    TrainLogRow row{ck_.step, ck_.scheduler.lr, loss.total.value, loss.grounding, loss.contrast, loss.caption, {}, {}};
    if (ck_.step % cfg_.eval_every == 0 && !data_.val.empty()) {
      row.val_loss = validation_loss();
      ck_.scheduler.observe(*row.val_loss);
      if (track_val_rank_) row.val_rank1 = rank1_rate(ck_.params, cfg_, data_.val, 0.5);
    }
    log_.push_back(row);
    if (on_log_) on_log_(row);
  }

  void run_until(long long target_step) {
    while (ck_.step < target_step) train_step();
  }

  void run() { run_until(cfg_.steps); }

 private:
  PlateauScheduler make_scheduler() const {
    PlateauScheduler s;
    s.factor = cfg_.plateau_factor;
    s.patience = std::max(0, cfg_.plateau_patience / cfg_.eval_every);
    s.lr = cfg_.learning_rate;
    return s;
  }

  ExperimentConfig cfg_;
  const Dataset& data_;
  Checkpoint ck_;
  bool track_val_rank_ = false;
  std::function<void(const TrainLogRow&)> on_log_;
  std::vector<TrainLogRow> log_;
  std::vector<std::size_t> order_;
  long long cached_epoch_ = -1;
};

}  // namespace sscs
