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

// Command-line driver: train, evaluate, ablate, report, gradcheck.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sscs/harness/ablation.hpp"
#include "sscs/harness/checkpoint.hpp"
#include "sscs/harness/config.hpp"
#include "sscs/harness/evaluation.hpp"
#include "sscs/harness/gradcheck.hpp"
#include "sscs/harness/reports.hpp"
#include "sscs/harness/trainer.hpp"

namespace fs = std::filesystem;

namespace {

constexpr const char* kOutDirEnv = "SSCS_OUT_DIR";

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> mode;
  std::optional<std::string> construction;
  std::optional<std::string> pooling;
  std::string out;
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("--config", o.config_path, "Flat key = value config file");
  app->add_option("--set", o.overrides, "Override one config key (key=value), repeatable");
  app->add_option("--seed", o.seed, "Random seed");
  app->add_option("--threads", o.threads, "Worker threads for evaluation (1 = bitwise reproducible)");
  app->add_option("--mode", o.mode, "Supervision mode")->check(CLI::IsMember({"baseline", "gtc", "ss"}, CLI::ignore_case));
  app->add_option("--construction", o.construction, "Support-set construction")
      ->check(CLI::IsMember({"v-ss", "gt-ss", "non-gt-ss"}, CLI::ignore_case));
  app->add_option("--pooling", o.pooling, "Support-set pooling")
      ->check(CLI::IsMember({"ca", "sa", "fc", "conv", "mp", "ap"}, CLI::ignore_case));
  app->add_option("--out", o.out, std::string("Output directory (default: $") + kOutDirEnv + " or ./runs)");
}

fs::path out_dir(const CommonOptions& o) {
  if (!o.out.empty()) return o.out;
  if (const char* env = std::getenv(kOutDirEnv); env != nullptr && *env != '\0') return env;
  return "runs";
}

// File values first, then --set overrides, then the dedicated flags.
sscs::ExperimentConfig resolve_config(const CommonOptions& o, const std::string& fallback_path = {}) {
  sscs::ExperimentConfig cfg;
  if (!o.config_path.empty()) {
    cfg = sscs::load_config_file(o.config_path);
  } else if (!fallback_path.empty() && fs::exists(fallback_path)) {
    cfg = sscs::load_config_file(fallback_path);
  }
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw sscs::ParameterError("--set expects key=value, got '" + kv + "'");
    sscs::set_config_value(cfg, sscs::detail::trim(kv.substr(0, eq)), sscs::detail::trim(kv.substr(eq + 1)));
  }
  if (o.seed) sscs::set_config_value(cfg, "seed", std::to_string(*o.seed));
  if (o.threads) sscs::set_config_value(cfg, "threads", std::to_string(*o.threads));
  if (o.mode) sscs::set_config_value(cfg, "mode", *o.mode);
  if (o.construction) sscs::set_config_value(cfg, "construction", *o.construction);
  if (o.pooling) sscs::set_config_value(cfg, "pooling", *o.pooling);
  cfg.validate();
  return cfg;
}

void print_ranks(const sscs::MetricsReport& m) {
  for (const auto& r : m.ranks) {
    std::ostringstream rate;
    rate << std::fixed << std::setprecision(4) << r.rate;
    std::cout << "Rank" << r.n << "@" << sscs::format_double(r.m) << " = " << rate.str() << '\n';
  }
}

sscs::Checkpoint load_for(const std::string& path, const sscs::ExperimentConfig& cfg, const sscs::Dataset& data) {
  const sscs::ModelParams skeleton = sscs::init_model(cfg, data.dim_video, cfg.seed);
  sscs::Checkpoint ck = sscs::load_checkpoint(path, skeleton);
  if (auto w = sscs::config_mismatch_warning(ck, cfg)) std::cerr << *w << '\n';
  return ck;
}

int cmd_train(const CommonOptions& o, const std::string& resume) {
  const sscs::ExperimentConfig cfg = resolve_config(o);
  const fs::path dir = out_dir(o);
  fs::create_directories(dir);
  const sscs::Dataset data = build_dataset(cfg);
  std::optional<sscs::Trainer> trainer;
  if (resume.empty()) {
    trainer.emplace(cfg, data);
  } else {
    trainer.emplace(cfg, data, load_for(resume, cfg, data));
  }
  std::ofstream log(dir / "train_log.csv");
  log << sscs::train_log_header() << '\n';
  trainer->set_log_callback([&](const sscs::TrainLogRow& row) {
    log << sscs::to_csv(row) << '\n';
    if (row.val_loss) std::cerr << "step " << row.step << " loss " << row.total << " val " << *row.val_loss << '\n';
  });
  trainer->run();
  sscs::save_checkpoint((dir / "checkpoint.bin").string(), trainer->checkpoint());
  sscs::write_text_file(dir / "config.txt", sscs::canonical_config_text(cfg));
  const sscs::Evaluation ev = sscs::evaluate_model(trainer->params(), cfg, data.test);
  sscs::write_text_file(dir / "ranks.csv", sscs::ranks_csv(ev.metrics));
  print_ranks(ev.metrics);
  std::cout << "wrote " << (dir / "checkpoint.bin").string() << '\n';
  return 0;
}

int cmd_evaluate(const CommonOptions& o, const std::string& checkpoint, const std::string& predictions) {
  const fs::path dir = out_dir(o);
  fs::create_directories(dir);
  if (!predictions.empty()) {
    const sscs::ExperimentConfig cfg = resolve_config(o);
    const auto queries = sscs::read_predictions(predictions);
    const sscs::MetricsReport m = sscs::metrics_from_predictions(queries, cfg.rank_n, cfg.rank_m, {});
    sscs::write_text_file(dir / "ranks.csv", sscs::ranks_csv(m));
    sscs::write_text_file(dir / "histogram.csv", sscs::histogram_csv(m.histogram));
    print_ranks(m);
    return 0;
  }
  const std::string ckpt = checkpoint.empty() ? (dir / "checkpoint.bin").string() : checkpoint;
  const sscs::ExperimentConfig cfg = resolve_config(o, (fs::path(ckpt).parent_path() / "config.txt").string());
  const sscs::Dataset data = build_dataset(cfg);
  const sscs::Checkpoint ck = load_for(ckpt, cfg, data);
  const sscs::Evaluation ev = sscs::evaluate_model(ck.params, cfg, data.test);
  sscs::write_text_file(dir / "ranks.csv", sscs::ranks_csv(ev.metrics));
  sscs::write_predictions((dir / "predictions.jsonl").string(), ev.predictions);
  print_ranks(ev.metrics);
  return 0;
}

int cmd_ablate(const CommonOptions& o, const std::string& grid, int seeds) {
  const sscs::ExperimentConfig cfg = resolve_config(o);
  std::vector<sscs::AblationCell> cells;
  if (grid == "toggles") {
    cells = sscs::toggle_grid(cfg.mode == sscs::SupervisionMode::kBaseline ? sscs::SupervisionMode::kSs : cfg.mode,
                              cfg.support.construction, cfg.support.pooling);
  } else if (grid == "supervision") {
    cells = sscs::supervision_grid(cfg.support.construction, cfg.support.pooling);
  } else {
    cells = sscs::support_set_grid();
  }
  std::vector<std::uint64_t> seed_list;
  for (int k = 0; k < seeds; ++k) seed_list.push_back(cfg.seed + static_cast<std::uint64_t>(k));
  const sscs::AblationTable table = sscs::run_ablation(cfg, cells, seed_list, [&](std::size_t ci, std::uint64_t seed, const sscs::MetricsReport& m) {
    std::cerr << cells[ci].label() << " seed " << seed << " R1@0.5 " << m.rate(1, 0.5) << '\n';
  });
  const fs::path dir = out_dir(o);
  fs::create_directories(dir);
  const fs::path path = dir / ("ablation_" + grid + ".csv");
  sscs::write_text_file(path, table.to_csv());
  std::cout << table.to_csv();
  return 0;
}

int cmd_report(const CommonOptions& o, const std::string& checkpoint) {
  const fs::path dir = out_dir(o);
  const std::string ckpt = checkpoint.empty() ? (dir / "checkpoint.bin").string() : checkpoint;
  const sscs::ExperimentConfig cfg = resolve_config(o, (fs::path(ckpt).parent_path() / "config.txt").string());
  const sscs::Dataset data = build_dataset(cfg);
  const sscs::Checkpoint ck = load_for(ckpt, cfg, data);
  for (const auto& p : sscs::emit_reports(ck.params, cfg, data.test, dir)) std::cout << "wrote " << p.string() << '\n';
  return 0;
}

int cmd_gradcheck(int seeds) {
  sscs::GradCheckOptions opts;
  opts.seeds = seeds;
  std::cout << "objective,cell,max_rel_error,worst_seed\n";
  const sscs::GradCheckSuite suite = sscs::run_gradcheck_suite(opts, [](const sscs::GradCheckResult& r) {
    std::cout << r.objective << ',' << r.cell << ',' << sscs::format_double(r.max_rel_error) << ',' << r.worst_seed
              << '\n';
  });
  std::cout << (suite.passed() ? "PASS" : "FAIL") << " max_rel_error=" << suite.max_rel_error()
            << " tolerance=" << suite.tolerance << '\n';
  return suite.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Support-set cross-supervision for video grounding"};
  app.require_subcommand(1);

  CommonOptions train_opts, eval_opts, ablate_opts, report_opts;
  std::string resume, eval_ckpt, eval_preds, report_ckpt, grid = "supervision";
  int ablate_seeds = 1;
  int gradcheck_seeds = 100;

  auto* train = app.add_subcommand("train", "Train a model and save a checkpoint");
  add_common(train, train_opts);
  train->add_option("--resume", resume, "Continue from a checkpoint");

  auto* evaluate = app.add_subcommand("evaluate", "Rank n@m on the test split, or on a prediction dump");
  add_common(evaluate, eval_opts);
  evaluate->add_option("--checkpoint", eval_ckpt, "Checkpoint (default: <out>/checkpoint.bin)");
  evaluate->add_option("--predictions", eval_preds, "JSON-lines prediction dump to score instead of a model");

  auto* ablate = app.add_subcommand("ablate", "Run an ablation grid");
  add_common(ablate, ablate_opts);
  ablate->add_option("--grid", grid, "toggles | supervision | support-set")
      ->check(CLI::IsMember({"toggles", "supervision", "support-set"}));
  ablate->add_option("--seeds", ablate_seeds, "Seeds per cell, starting at --seed")->check(CLI::PositiveNumber);

  auto* report = app.add_subcommand("report", "Write similarity, recall, histogram and rank reports");
  add_common(report, report_opts);
  report->add_option("--checkpoint", report_ckpt, "Checkpoint (default: <out>/checkpoint.bin)");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every objective and grid cell");
  gradcheck->add_option("--seeds", gradcheck_seeds, "Random problems per objective")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(train_opts, resume);
    if (*evaluate) return cmd_evaluate(eval_opts, eval_ckpt, eval_preds);
    if (*ablate) return cmd_ablate(ablate_opts, grid, ablate_seeds);
    if (*report) return cmd_report(report_opts, report_ckpt);
    if (*gradcheck) return cmd_gradcheck(gradcheck_seeds);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
