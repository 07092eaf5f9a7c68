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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "sscs/harness/ablation.hpp"
#include "sscs/harness/checkpoint.hpp"
#include "sscs/harness/config.hpp"
#include "sscs/harness/evaluation.hpp"
#include "sscs/harness/gradcheck.hpp"
#include "sscs/harness/ingest.hpp"
#include "sscs/harness/reports.hpp"
#include "sscs/harness/trainer.hpp"

namespace sscs {
namespace {

namespace fs = std::filesystem;

// Fresh scratch directory per test, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / ("sscs_harness_" + name)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small enough that a few dozen steps take milliseconds.
ExperimentConfig tiny_config(SupervisionMode mode = SupervisionMode::kSs) {
  ExperimentConfig cfg;
  cfg.world.n_entities = 6;
  cfg.world.n_actions = 3;
  cfg.world.dim_video = 8;
  cfg.world.num_clips = 6;
  cfg.n_train = 32;
  cfg.n_val = 8;
  cfg.n_test = 16;
  cfg.batch_size = 4;
  cfg.steps = 12;
  cfg.eval_every = 4;
  cfg.plateau_patience = 4;
  cfg.dim = 8;
  cfg.dim_text = 4;
  cfg.t_max = 6;
  cfg.mode = mode;
  cfg.seed = 3;
  return cfg;
}

bool same_params(const ModelParams& a, const ModelParams& b) {
  std::vector<Mat> xs;
  a.for_each([&](const std::string&, const Eigen::Map<const Mat>& m) { xs.emplace_back(m); });
  std::size_t k = 0;
  bool eq = true;
  b.for_each([&](const std::string&, const Eigen::Map<const Mat>& m) { eq = eq && k < xs.size() && xs[k++] == m; });
  return eq && k == xs.size();
}

// ---- config ----------------------------------------------------------------

TEST(Config, DefaultsAreValid) {
  ExperimentConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.batch_size, 32);
  EXPECT_EQ(cfg.dim, 128);
  EXPECT_EQ(cfg.steps, 2000);
  EXPECT_EQ(cfg.learning_rate, 1e-3);
  EXPECT_EQ(cfg.weights.tau, 0.1);
  EXPECT_EQ(cfg.nms_threshold, 0.5);
  EXPECT_EQ(cfg.world.num_clips, 16);
}

TEST(Config, TextSetsKnownKeys) {
  ExperimentConfig cfg;
  apply_config_text(cfg,
                    "# comment\n"
                    "steps = 10\n"
                    "mode = gtc   # trailing\n"
                    "construction = NON-GT-SS\n"
                    "pooling = conv\n"
                    "lambda1 = 0.001\n"
                    "rank_m = 0.3, 0.7\n"
                    "contrast = false\n"
                    "\n");
  EXPECT_EQ(cfg.steps, 10);
  EXPECT_EQ(cfg.mode, SupervisionMode::kGtc);
  EXPECT_EQ(cfg.support.construction, Construction::kNonGroundTruth);
  EXPECT_EQ(cfg.support.pooling, PoolingMethod::kConv);
  EXPECT_EQ(cfg.weights.lambda1, 0.001);
  EXPECT_EQ(cfg.rank_m, (std::vector<double>{0.3, 0.7}));
  EXPECT_FALSE(cfg.use_contrast);
}

TEST(Config, UnknownKeysAndBadValuesAreErrors) {
  ExperimentConfig cfg;
  try {
    apply_config_text(cfg, "steps = 3\nlamda1 = 0.1\n", "run.cfg");
    FAIL() << "unknown key accepted";
  } catch (const ParameterError& e) {
    EXPECT_NE(std::string(e.what()).find("run.cfg:2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("lamda1"), std::string::npos);
  }
  EXPECT_THROW(apply_config_text(cfg, "steps = ten\n"), ParameterError);
  EXPECT_THROW(apply_config_text(cfg, "steps 10\n"), ParameterError);
  EXPECT_THROW(apply_config_text(cfg, "mode = fancy\n"), ParameterError);
  EXPECT_THROW(apply_config_text(cfg, "pooling = lstm\n"), ParameterError);
  EXPECT_THROW(set_config_value(cfg, "nope", "1"), ParameterError);
  EXPECT_THROW(load_config_file("/nonexistent/config.txt"), ParameterError);
}

TEST(Config, ValidationRejectsBadValues) {
  const auto bad = [](const std::string& text) {
    ExperimentConfig cfg;
    apply_config_text(cfg, text);
    return cfg;
  };
  EXPECT_THROW(bad("batch_size = 0").validate(), ParameterError);
  EXPECT_THROW(bad("steps = -1").validate(), ParameterError);
  EXPECT_THROW(bad("tau = 0").validate(), ParameterError);
  EXPECT_THROW(bad("lambda2 = -1").validate(), ParameterError);
  EXPECT_THROW(bad("nms_threshold = 0").validate(), ParameterError);
  EXPECT_THROW(bad("rank_n = 0").validate(), ParameterError);
  EXPECT_THROW(bad("conv_width = 2").validate(), ParameterError);
  EXPECT_THROW(bad("dataset = manifest").validate(), ParameterError);
}

TEST(Config, CanonicalTextRoundTrips) {
  ExperimentConfig cfg = tiny_config();
  cfg.weights.lambda1 = 0.04;
  cfg.recall_thresholds = {0.01, 0.5};
  const std::string text = canonical_config_text(cfg);
  ExperimentConfig back;
  apply_config_text(back, text);
  EXPECT_EQ(canonical_config_text(back), text);
  EXPECT_EQ(config_hash(back), config_hash(cfg));
  EXPECT_NE(text.find("lambda1 = 0.04\n"), std::string::npos);
}

TEST(Config, HashIgnoresStepsAndThreadsOnly) {
  const ExperimentConfig a = tiny_config();
  ExperimentConfig b = a;
  b.steps = 999;
  b.threads = 4;
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.learning_rate = 2e-3;
  EXPECT_NE(config_hash(a), config_hash(b));
}

// ---- ingest ----------------------------------------------------------------

TEST(Ingest, SingleSampleRoundTrip) {
  TempDir dir("ingest_one");
  Mat f(2, 3);
  f << 1.5, -2.0, 0.25, 3.0, 0.0, -0.125;
  write_feature_file((dir.path() / "a.bin").string(), f);
  EXPECT_EQ(fs::file_size(dir.path() / "a.bin"), 24u);
  write_manifest((dir.path() / "m.jsonl").string(), {ManifestEntry{"a", 2, 3, "a.bin", {0, 2}, 0.5, 1.5, 1.0}});
  const auto samples = ingest_features((dir.path() / "m.jsonl").string());
  ASSERT_EQ(samples.size(), 1u);
  EXPECT_EQ(samples[0].features, f);
  EXPECT_EQ(samples[0].tokens.tokens, (std::vector<int>{0, 2}));
  EXPECT_EQ(samples[0].gt, (GroundTruthInterval{0, 1}));
  EXPECT_TRUE(samples[0].clip_entities.empty());
}

TEST(Ingest, WrongFileSizeNamesTheSample) {
  TempDir dir("ingest_size");
  {
    std::ofstream out(dir.path() / "a.bin", std::ios::binary);
    out << std::string(23, '\0');
  }
  write_manifest((dir.path() / "m.jsonl").string(), {ManifestEntry{"clip-a", 2, 3, "a.bin", {0}, 0.0, 1.0, 1.0}});
  try {
    ingest_features((dir.path() / "m.jsonl").string());
    FAIL() << "size mismatch accepted";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("clip-a"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("23"), std::string::npos);
  }
}

TEST(Ingest, MissingFileAndMalformedJsonAreErrors) {
  TempDir dir("ingest_errors");
  write_manifest((dir.path() / "m.jsonl").string(), {ManifestEntry{"gone", 2, 3, "gone.bin", {0}, 0.0, 1.0, 1.0}});
  EXPECT_THROW(ingest_features((dir.path() / "m.jsonl").string()), DataError);
  {
    std::ofstream out(dir.path() / "bad.jsonl");
    out << "{\"video_id\": \"x\", \"T\": 2\n";
  }
  EXPECT_THROW(ingest_features((dir.path() / "bad.jsonl").string()), DataError);
  {
    std::ofstream out(dir.path() / "missing_key.jsonl");
    out << "{\"video_id\": \"x\", \"T\": 2}\n";
  }
  EXPECT_THROW(ingest_features((dir.path() / "missing_key.jsonl").string()), DataError);
  EXPECT_THROW(ingest_features((dir.path() / "absent.jsonl").string()), DataError);
}

TEST(Ingest, InvalidGroundTruthRejected) {
  TempDir dir("ingest_gt");
  write_feature_file((dir.path() / "a.bin").string(), Mat::Zero(2, 3));
  write_manifest((dir.path() / "m.jsonl").string(), {ManifestEntry{"a", 2, 3, "a.bin", {0}, 1.5, 2.5, 1.0}});
  EXPECT_THROW(ingest_features((dir.path() / "m.jsonl").string()), DataError);
}

TEST(Ingest, HundredRandomSamplesAreBitwiseEqual) {
  TempDir dir("ingest_many");
  std::mt19937_64 rng(5);
  std::normal_distribution<float> n(0.0f, 3.0f);
  std::uniform_int_distribution<int> size(1, 9);
  std::vector<ManifestEntry> entries;
  std::vector<Mat> expect;
  for (int i = 0; i < 100; ++i) {
    const int t = size(rng);
    const int d = size(rng);
    Mat f(t, d);
    for (int r = 0; r < t; ++r)
      for (int c = 0; c < d; ++c) f(r, c) = static_cast<double>(n(rng));  // exactly representable as float
    const std::string file = "f" + std::to_string(i) + ".bin";
    write_feature_file((dir.path() / file).string(), f);
    entries.push_back({"v" + std::to_string(i), t, d, file, {i % 5}, 0.0, t * 0.5, 0.5});
    expect.push_back(f);
  }
  write_manifest((dir.path() / "m.jsonl").string(), entries);
  const auto samples = ingest_features((dir.path() / "m.jsonl").string());
  ASSERT_EQ(samples.size(), 100u);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    EXPECT_EQ(samples[i].video_id, entries[i].video_id);
    EXPECT_EQ(samples[i].features, expect[i]);
  }
}

TEST(Ingest, ManifestDatasetSplitsFromTheEnd) {
  TempDir dir("ingest_split");
  std::vector<ManifestEntry> entries;
  for (int i = 0; i < 10; ++i) {
    const std::string file = "f" + std::to_string(i) + ".bin";
    write_feature_file((dir.path() / file).string(), Mat::Constant(4, 3, i));
    entries.push_back({"v" + std::to_string(i), 4, 3, file, {i % 3}, 0.0, 2.0, 1.0});
  }
  write_manifest((dir.path() / "m.jsonl").string(), entries);
  ExperimentConfig cfg;
  cfg.dataset = DatasetSource::kManifest;
  cfg.manifest = (dir.path() / "m.jsonl").string();
  cfg.vocab_size = 3;
  cfg.batch_size = 2;
  cfg.n_val = 2;
  cfg.n_test = 3;
  const Dataset d = build_dataset(cfg);
  ASSERT_EQ(d.train.size(), 5u);
  ASSERT_EQ(d.val.size(), 2u);
  ASSERT_EQ(d.test.size(), 3u);
  EXPECT_EQ(d.val.front().video_id, "v5");
  EXPECT_EQ(d.test.back().video_id, "v9");
  EXPECT_EQ(d.dim_video, 3);
}

// ---- optimizer -------------------------------------------------------------

TEST(Optim, AdamFirstStepMovesByLearningRate) {
  ModelParams p = init_model(tiny_config(), 8, 1);
  const Mat before = p.grounder.weight;
  GradMap g;
  g[kGrounderWeightKey] = Mat::Constant(8, 1, -3.0);
  AdamOptimizer adam;
  adam.step(p, g, 0.01);
  EXPECT_LT((p.grounder.weight - before - Mat::Constant(8, 1, 0.01)).cwiseAbs().maxCoeff(), 1e-8);
  g[kGrounderWeightKey] = Mat::Zero(3, 1);
  EXPECT_THROW(adam.step(p, g, 0.01), ParameterError);
}

TEST(Optim, PlateauDecaysAfterPatience) {
  PlateauScheduler s;
  s.patience = 2;
  s.factor = 0.5;
  s.lr = 1.0;
  s.observe(1.0);
  s.observe(1.0);
  s.observe(1.0);
  EXPECT_EQ(s.lr, 1.0);
  s.observe(1.0);
  EXPECT_EQ(s.lr, 0.5);
  s.observe(0.5);
  EXPECT_EQ(s.bad_evaluations, 0);
  EXPECT_EQ(s.lr, 0.5);
}

// ---- training --------------------------------------------------------------

TEST(Trainer, ZeroStepsEqualsInitialization) {
  ExperimentConfig cfg = tiny_config();
  cfg.steps = 0;
  const Dataset data = build_dataset(cfg);
  Trainer t(cfg, data);
  t.run();
  EXPECT_EQ(t.step(), 0);
  EXPECT_TRUE(same_params(t.params(), init_model(cfg, data.dim_video, cfg.seed)));
}

TEST(Trainer, ZeroLambdaSupportSetEqualsBaseline) {
  ExperimentConfig ss = tiny_config(SupervisionMode::kSs);
  ss.weights.lambda1 = 0.0;
  ss.weights.lambda2 = 0.0;
  ExperimentConfig base = ss;
  base.mode = SupervisionMode::kBaseline;
  const Dataset data = build_dataset(ss);
  Trainer a(ss, data);
  Trainer b(base, data);
  for (int k = 0; k < ss.steps; ++k) {
    a.train_step();
    b.train_step();
    ASSERT_TRUE(same_params(a.params(), b.params())) << "step " << k;
  }
}

TEST(Trainer, RerunIsBitwiseIdentical) {
  for (auto mode : {SupervisionMode::kBaseline, SupervisionMode::kGtc, SupervisionMode::kSs}) {
    const ExperimentConfig cfg = tiny_config(mode);
    const Dataset d1 = build_dataset(cfg);
    const Dataset d2 = build_dataset(cfg);
    Trainer a(cfg, d1);
    Trainer b(cfg, d2);
    a.run();
    b.run();
    EXPECT_EQ(serialize_checkpoint(a.checkpoint()), serialize_checkpoint(b.checkpoint())) << to_string(mode);
    ASSERT_EQ(a.log().size(), b.log().size());
    for (std::size_t k = 0; k < a.log().size(); ++k) EXPECT_EQ(to_csv(a.log()[k]), to_csv(b.log()[k]));
  }
}

TEST(Trainer, DifferentSeedsDiffer) {
  ExperimentConfig a = tiny_config();
  ExperimentConfig b = a;
  b.seed = a.seed + 1;
  const Dataset da = build_dataset(a);
  const Dataset db = build_dataset(b);
  Trainer ta(a, da);
  Trainer tb(b, db);
  ta.run();
  tb.run();
  EXPECT_FALSE(same_params(ta.params(), tb.params()));
}

TEST(Trainer, LogRecordsComponentsAndValidation) {
  ExperimentConfig cfg = tiny_config(SupervisionMode::kGtc);
  const Dataset data = build_dataset(cfg);
  Trainer t(cfg, data);
  t.set_track_val_rank(true);
  int callbacks = 0;
  t.set_log_callback([&](const TrainLogRow&) { ++callbacks; });
  t.run();
  ASSERT_EQ(t.log().size(), static_cast<std::size_t>(cfg.steps));
  EXPECT_EQ(callbacks, cfg.steps);
  for (const auto& row : t.log()) {
    EXPECT_NEAR(row.total, row.grounding + cfg.weights.lambda1 * row.contrast + cfg.weights.lambda2 * row.caption,
                1e-12);
    EXPECT_GT(row.contrast, 0.0);
    EXPECT_GT(row.caption, 0.0);
    EXPECT_EQ(row.val_loss.has_value(), row.step % cfg.eval_every == 0);
    EXPECT_EQ(row.val_rank1.has_value(), row.step % cfg.eval_every == 0);
  }
  const std::string header = train_log_header();
  const std::string first = to_csv(t.log().front());
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), std::count(first.begin(), first.end(), ','));
}

std::set<std::string> grad_keys(const ExperimentConfig& cfg) {
  const Dataset data = build_dataset(cfg);
  const ModelParams p = init_model(cfg, data.dim_video, cfg.seed);
  std::vector<const GroundingSample*> batch;
  for (int i = 0; i < cfg.batch_size; ++i) batch.push_back(&data.train[static_cast<std::size_t>(i)]);
  std::set<std::string> keys;
  for (const auto& [k, g] : compute_step_loss(p, cfg, batch).total.grads) keys.insert(k);
  return keys;
}

TEST(Trainer, ModeContainment) {
  const std::set<std::string> base_expected = {"psi.W",      "psi.b",        "phi.W",         "phi.b",
                                               "tokens.E",   "grounder.u",   "grounder.len",  "grounder.c"};
  EXPECT_EQ(grad_keys(tiny_config(SupervisionMode::kBaseline)), base_expected);

  const auto gtc = grad_keys(tiny_config(SupervisionMode::kGtc));
  EXPECT_TRUE(gtc.count(kCaptionWeightKey));
  EXPECT_TRUE(gtc.count(kDecoderWeightKey));
  EXPECT_FALSE(gtc.count(kFcWeightKey));
  EXPECT_FALSE(gtc.count(kConvKernelKey));

  ExperimentConfig ss = tiny_config(SupervisionMode::kSs);
  ss.support.pooling = PoolingMethod::kFullyConnected;
  const auto ss_keys = grad_keys(ss);
  EXPECT_TRUE(ss_keys.count(kFcWeightKey));
  EXPECT_TRUE(ss_keys.count(kDecoderWeightKey));
  EXPECT_FALSE(ss_keys.count(kCaptionWeightKey));
  EXPECT_FALSE(ss_keys.count(kConvKernelKey));
  for (const auto& k : ss_keys) EXPECT_EQ(k.find('/'), std::string::npos) << "embedding key leaked: " << k;
}

TEST(Trainer, NonGtSupportSetWithFullVideoGroundTruthFails) {
  ExperimentConfig cfg = tiny_config(SupervisionMode::kSs);
  cfg.support.construction = Construction::kNonGroundTruth;
  cfg.world.gt_fraction_min = 1.0;
  cfg.world.gt_fraction_max = 1.0;
  const Dataset data = build_dataset(cfg);
  Trainer t(cfg, data);
  EXPECT_THROW(t.train_step(), DataError);
}

// ---- checkpoints -----------------------------------------------------------

TEST(Checkpoint, RoundTripIsBitExact) {
  TempDir dir("ckpt_roundtrip");
  const ExperimentConfig cfg = tiny_config();
  const Dataset data = build_dataset(cfg);
  Trainer t(cfg, data);
  t.run();
  const std::string path = (dir.path() / "c.bin").string();
  save_checkpoint(path, t.checkpoint());
  const ModelParams skeleton = init_model(cfg, data.dim_video, cfg.seed);
  const Checkpoint back = load_checkpoint(path, skeleton);
  EXPECT_EQ(serialize_checkpoint(back), serialize_checkpoint(t.checkpoint()));
  EXPECT_TRUE(same_params(back.params, t.params()));
  EXPECT_EQ(back.step, t.step());
  EXPECT_FALSE(config_mismatch_warning(back, cfg).has_value());
  ExperimentConfig other = cfg;
  other.weights.lambda1 = 0.5;
  EXPECT_TRUE(config_mismatch_warning(back, other).has_value());
}

TEST(Checkpoint, TruncatedOrCorruptFilesAreErrors) {
  TempDir dir("ckpt_corrupt");
  const ExperimentConfig cfg = tiny_config();
  const Dataset data = build_dataset(cfg);
  Trainer t(cfg, data);
  const std::vector<char> bytes = serialize_checkpoint(t.checkpoint());
  const ModelParams& skeleton = t.params();
  for (std::size_t cut : {std::size_t{0}, std::size_t{10}, bytes.size() / 2, bytes.size() - 1}) {
    const std::vector<char> part(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    EXPECT_THROW(deserialize_checkpoint(part, skeleton), DataError) << cut;
  }
  std::vector<char> flipped = bytes;
  flipped[flipped.size() / 2] ^= 0x40;
  EXPECT_THROW(deserialize_checkpoint(flipped, skeleton), DataError);
  std::vector<char> magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(magic, skeleton), DataError);
  EXPECT_THROW(load_checkpoint((dir.path() / "absent.bin").string(), skeleton), DataError);

  ExperimentConfig wider = cfg;
  wider.dim = 10;
  EXPECT_THROW(deserialize_checkpoint(bytes, init_model(wider, data.dim_video, cfg.seed)), DataError);
}

TEST(Checkpoint, ResumedTrainingMatchesUninterruptedRun) {
  TempDir dir("ckpt_resume");
  ExperimentConfig cfg = tiny_config();
  cfg.steps = 20;
  const Dataset data = build_dataset(cfg);
  Trainer full(cfg, data);
  full.run();

  Trainer first(cfg, data);
  first.run_until(10);  // crosses an epoch boundary (8 batches per epoch)
  const std::string path = (dir.path() / "mid.bin").string();
  save_checkpoint(path, first.checkpoint());
  Trainer resumed(cfg, data, load_checkpoint(path, init_model(cfg, data.dim_video, cfg.seed)));
  resumed.run();
  EXPECT_EQ(resumed.step(), 20);
  EXPECT_EQ(serialize_checkpoint(resumed.checkpoint()), serialize_checkpoint(full.checkpoint()));
  for (std::size_t k = 0; k < resumed.log().size(); ++k) {
    EXPECT_EQ(to_csv(resumed.log()[k]), to_csv(full.log()[k + 10]));
  }
}

// ---- evaluation and reports ------------------------------------------------

TEST(Evaluation, ThreadCountDoesNotChangeResults) {
  ExperimentConfig cfg = tiny_config();
  const Dataset data = build_dataset(cfg);
  Trainer t(cfg, data);
  t.run();
  ExperimentConfig many = cfg;
  many.threads = 3;
  const Evaluation a = evaluate_model(t.params(), cfg, data.test);
  const Evaluation b = evaluate_model(t.params(), many, data.test);
  EXPECT_EQ(ranks_csv(a.metrics), ranks_csv(b.metrics));
  EXPECT_EQ(a.video_similarities, b.video_similarities);
  EXPECT_EQ(rank1_rate(t.params(), cfg, data.test), rank1_rate(t.params(), many, data.test));
  for (const auto& r : a.metrics.ranks) {
    EXPECT_GE(r.rate, 0.0);
    EXPECT_LE(r.rate, 1.0);
  }
  const double acc = retrieval_accuracy(t.params(), cfg, data.test, 4);
  EXPECT_GE(acc, 0.0);
  EXPECT_LE(acc, 1.0);
  const EntityAlignment al = entity_alignment(t.params(), cfg, data.test);
  EXPECT_GE(al.ground_truth, -1.0);
  EXPECT_LE(al.ground_truth, 1.0);
}

TEST(Reports, SimilarityMatrixIsSixteenBySixteen) {
  ExperimentConfig cfg = tiny_config();
  const Dataset data = build_dataset(cfg);
  const ModelParams p = init_model(cfg, data.dim_video, cfg.seed);
  std::vector<const GroundingSample*> head;
  for (int i = 0; i < 16; ++i) head.push_back(&data.test[static_cast<std::size_t>(i)]);
  const Mat s = similarity_matrix(p, cfg, head);
  EXPECT_EQ(s.rows(), 16);
  EXPECT_EQ(s.cols(), 16);
  EXPECT_TRUE(s.allFinite());
  EXPECT_LE(s.cwiseAbs().maxCoeff(), 1.0 + 1e-12);
}

TEST(Reports, DuplicatedPairGivesSymmetricMatrix) {
  ExperimentConfig cfg = tiny_config();
  const Dataset data = build_dataset(cfg);
  const ModelParams p = init_model(cfg, data.dim_video, cfg.seed);
  const Mat s = similarity_matrix(p, cfg, {&data.test[0], &data.test[0]});
  ASSERT_EQ(s.rows(), 2);
  EXPECT_EQ(s(0, 1), s(1, 0));
  EXPECT_EQ(s(0, 0), s(1, 1));
}

TEST(Reports, HistogramMassEqualsSuccesses) {
  ExperimentConfig cfg = tiny_config();
  const Dataset data = build_dataset(cfg);
  Trainer t(cfg, data);
  t.run();
  const Evaluation ev = evaluate_model(t.params(), cfg, data.test);
  std::size_t hits = 0;
  for (const auto& q : ev.predictions) hits += rank_n_at_m(q.spans, q.gt, 1, 0.5) ? 1 : 0;
  EXPECT_EQ(ev.metrics.histogram.total(), static_cast<double>(hits));
}

TEST(Reports, EmittedFilesAreDeterministic) {
  TempDir dir("reports");
  const ExperimentConfig cfg = tiny_config();
  const Dataset data = build_dataset(cfg);
  Trainer t(cfg, data);
  t.run();
  const auto a = emit_reports(t.params(), cfg, data.test, dir.path() / "a");
  const auto b = emit_reports(t.params(), cfg, data.test, dir.path() / "b");
  ASSERT_EQ(a.size(), 5u);
  for (std::size_t k = 0; k < a.size(); ++k) {
    ASSERT_TRUE(fs::exists(a[k]));
    EXPECT_EQ(slurp(a[k]), slurp(b[k])) << a[k].filename();
  }
  const std::string sim = slurp(dir.path() / "a" / "similarity.csv");
  EXPECT_EQ(std::count(sim.begin(), sim.end(), '\n'), 16);
  EXPECT_EQ(read_predictions((dir.path() / "a" / "predictions.jsonl").string()).size(), data.test.size());
  EXPECT_EQ(slurp(dir.path() / "a" / "recall.csv").substr(0, 31), "threshold,recall_video,recall_g");
}

// ---- ablation --------------------------------------------------------------

TEST(Ablation, GridShapes) {
  EXPECT_EQ(toggle_grid(SupervisionMode::kGtc).size(), 5u);
  EXPECT_EQ(supervision_grid().size(), 7u);
  const auto grid = support_set_grid();
  ASSERT_EQ(grid.size(), 18u);
  std::set<std::pair<Construction, PoolingMethod>> cells;
  for (const auto& c : grid) {
    EXPECT_EQ(c.mode, SupervisionMode::kSs);
    cells.insert({c.construction, c.pooling});
  }
  EXPECT_EQ(cells.size(), 18u);
  std::set<std::string> labels;
  for (const auto& c : toggle_grid(SupervisionMode::kSs)) labels.insert(c.label());
  EXPECT_EQ(labels.size(), 5u);
}

TEST(Ablation, ToggleGridEmitsFiveRowsAndRerunsIdentically) {
  ExperimentConfig cfg = tiny_config();
  cfg.steps = 4;
  const auto cells = toggle_grid(SupervisionMode::kSs);
  const AblationTable a = run_ablation(cfg, cells, {1, 2});
  const AblationTable b = run_ablation(cfg, cells, {1, 2});
  ASSERT_EQ(a.rows.size(), 5u);
  EXPECT_EQ(a.to_csv(), b.to_csv());
  for (const auto& r : a.rows) {
    EXPECT_TRUE(r.error.empty()) << r.error;
    EXPECT_EQ(r.seeds, 2);
  }
  const std::string csv = a.to_csv();
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
}

TEST(Ablation, InvalidCellIsRecordedAndRunContinues) {
  ExperimentConfig cfg = tiny_config();
  cfg.steps = 2;
  cfg.world.gt_fraction_min = 1.0;
  cfg.world.gt_fraction_max = 1.0;
  const std::vector<AblationCell> cells = {
      {SupervisionMode::kSs, true, true, Construction::kNonGroundTruth, PoolingMethod::kAvgPool},
      {SupervisionMode::kSs, true, true, Construction::kVideo, PoolingMethod::kAvgPool}};
  const AblationTable t = run_ablation(cfg, cells, {1});
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_FALSE(t.rows[0].error.empty());
  EXPECT_EQ(t.rows[0].seeds, 0);
  EXPECT_TRUE(t.rows[1].error.empty());
  EXPECT_EQ(t.rows[1].seeds, 1);
}

// ---- gradient suite --------------------------------------------------------

TEST(GradCheckSuite, FewSeedsPassEveryObjectiveAndCell) {
  GradCheckOptions o;
  o.seeds = 2;
  const GradCheckSuite s = run_gradcheck_suite(o);
  EXPECT_TRUE(s.passed()) << s.max_rel_error();
  std::set<std::string> cells;
  for (const auto& r : s.results) {
    EXPECT_LT(r.max_rel_error, o.tolerance) << r.objective << " " << r.cell;
    EXPECT_EQ(r.trials, o.seeds);
    if (r.cell != "-") cells.insert(r.cell);
  }
  EXPECT_EQ(cells.size(), 18u);
}

}  // namespace
}  // namespace sscs
