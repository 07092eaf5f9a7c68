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

// Experiment configuration: a flat `key = value` text format. Every key maps
// to exactly one field; unknown keys and malformed values are errors.

#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "sscs/grounding.hpp"
#include "sscs/objectives.hpp"
#include "sscs/support_set.hpp"

namespace sscs {

enum class SupervisionMode { kBaseline, kGtc, kSs };

inline std::string to_string(SupervisionMode m) {
  switch (m) {
    case SupervisionMode::kBaseline: return "baseline";
    case SupervisionMode::kGtc: return "gtc";
    case SupervisionMode::kSs: return "ss";
  }
  return "?";
}

inline SupervisionMode parse_mode(std::string_view s) {
  const std::string v = detail::lower(s);
  if (v == "baseline") return SupervisionMode::kBaseline;
  if (v == "gtc") return SupervisionMode::kGtc;
  if (v == "ss") return SupervisionMode::kSs;
  throw ParameterError("unknown supervision mode: " + std::string(s));
}

enum class DatasetSource { kSynthetic, kManifest };

struct ExperimentConfig {
  DatasetSource dataset = DatasetSource::kSynthetic;
  std::string manifest;
  SyntheticWorldConfig world;
  int n_train = 2048;
  int n_val = 128;
  int n_test = 256;

  int batch_size = 32;
  int steps = 2000;
  double learning_rate = 1e-3;
  double plateau_factor = 0.5;
  int plateau_patience = 100;  // steps
  int eval_every = 50;

  LossWeights weights;  // tau 0.1, lambda 0.1 / 0.1
  SupervisionMode mode = SupervisionMode::kSs;
  SupportSetSpec support;
  bool use_contrast = true;
  bool use_caption = true;

  std::vector<int> rank_n = {1, 5};
  std::vector<double> rank_m = {0.3, 0.5, 0.7};
  double nms_threshold = 0.5;
  std::vector<double> recall_thresholds = {0.02, 0.04, 0.06};

  std::uint64_t seed = 0;
  int threads = 1;
  bool normalize_embeddings = true;
  int dim = 128;
  int dim_text = 32;
  int t_max = 16;
  int vocab_size = 0;  // 0: derived from the synthetic world
  int conv_width = 3;

  int effective_vocab() const {
    if (vocab_size > 0) return vocab_size;
    if (dataset == DatasetSource::kSynthetic) return world.vocab_size();
    throw ParameterError("vocab_size must be set for manifest datasets");
  }

  void validate() const {
    if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
    if (steps < 0) throw ParameterError("steps must be >= 0");
    if (!(learning_rate > 0.0)) throw ParameterError("learning_rate must be positive");
    if (!(plateau_factor > 0.0 && plateau_factor <= 1.0)) throw ParameterError("plateau_factor must be in (0, 1]");
    if (plateau_patience < 0 || eval_every < 1) throw ParameterError("plateau_patience >= 0 and eval_every >= 1 required");
    weights.validate();
    if (dim < 1 || dim_text < 1 || t_max < 1) throw ParameterError("dimensions must be positive");
    if (conv_width < 1 || conv_width % 2 == 0) throw ParameterError("conv_width must be odd");
    if (!(nms_threshold > 0.0 && nms_threshold <= 1.0)) throw ParameterError("nms_threshold must be in (0, 1]");
    for (int n : rank_n) validate_rank_params(n, 0.5);
    for (double m : rank_m) validate_rank_params(1, m);
    if (threads < 1) throw ParameterError("threads must be >= 1");
    if (dataset == DatasetSource::kSynthetic) {
      world.validate();
      if (n_train < batch_size) throw ParameterError("n_train must be >= batch_size");
      if (vocab_size != 0 && vocab_size < world.vocab_size()) throw ParameterError("vocab_size smaller than the synthetic vocabulary");
    } else if (manifest.empty()) {
      throw ParameterError("dataset = manifest requires `manifest`");
    }
    if (n_val < 0 || n_test < 0) throw ParameterError("split sizes must be non-negative");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ParameterError("config key `" + key + "`: expected a number, got `" + v + "`");
  }
}

inline long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long d = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ParameterError("config key `" + key + "`: expected an integer, got `" + v + "`");
  }
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    const unsigned long long d = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ParameterError("config key `" + key + "`: expected an unsigned integer, got `" + v + "`");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  const std::string l = lower(v);
  if (l == "true" || l == "1" || l == "on" || l == "yes") return true;
  if (l == "false" || l == "0" || l == "off" || l == "no") return false;
  throw ParameterError("config key `" + key + "`: expected a boolean, got `" + v + "`");
}

template <class T, class Parse>
std::vector<T> parse_list(const std::string& v, Parse parse) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse(item));
  }
  return out;
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::ostringstream os;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    os << (i ? "," : "");
    if constexpr (std::is_floating_point_v<T>) {
      os << format_double(xs[i]);
    } else {
      os << xs[i];
    }
  }
  return os.str();
}

inline std::string fmt(double d) { return format_double(d); }

struct ConfigKey {
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define SSCS_INT_KEY(name, field)                                                                   \
  {name, {[](ExperimentConfig& c, const std::string& v) { c.field = static_cast<int>(parse_int(name, v)); }, \
          [](const ExperimentConfig& c) { return std::to_string(c.field); }}}
#define SSCS_DOUBLE_KEY(name, field)                                                        \
  {name, {[](ExperimentConfig& c, const std::string& v) { c.field = parse_double(name, v); }, \
          [](const ExperimentConfig& c) { return fmt(c.field); }}}
#define SSCS_BOOL_KEY(name, field)                                                        \
  {name, {[](ExperimentConfig& c, const std::string& v) { c.field = parse_bool(name, v); }, \
          [](const ExperimentConfig& c) { return std::string(c.field ? "true" : "false"); }}}

inline const std::map<std::string, ConfigKey>& config_keys() {
  static const std::map<std::string, ConfigKey> keys = {
      {"dataset",
       {[](ExperimentConfig& c, const std::string& v) {
          const std::string l = lower(v);
          if (l == "synthetic") c.dataset = DatasetSource::kSynthetic;
          else if (l == "manifest") c.dataset = DatasetSource::kManifest;
          else throw ParameterError("config key `dataset`: expected synthetic|manifest, got `" + v + "`");
        },
        [](const ExperimentConfig& c) {
          return std::string(c.dataset == DatasetSource::kSynthetic ? "synthetic" : "manifest");
        }}},
      {"manifest", {[](ExperimentConfig& c, const std::string& v) { c.manifest = v; },
                    [](const ExperimentConfig& c) { return c.manifest; }}},
      SSCS_INT_KEY("n_train", n_train),
      SSCS_INT_KEY("n_val", n_val),
      SSCS_INT_KEY("n_test", n_test),
      SSCS_INT_KEY("batch_size", batch_size),
      SSCS_INT_KEY("steps", steps),
      SSCS_DOUBLE_KEY("learning_rate", learning_rate),
      SSCS_DOUBLE_KEY("plateau_factor", plateau_factor),
      SSCS_INT_KEY("plateau_patience", plateau_patience),
      SSCS_INT_KEY("eval_every", eval_every),
      SSCS_DOUBLE_KEY("tau", weights.tau),
      SSCS_DOUBLE_KEY("lambda1", weights.lambda1),
      SSCS_DOUBLE_KEY("lambda2", weights.lambda2),
      {"mode", {[](ExperimentConfig& c, const std::string& v) { c.mode = parse_mode(v); },
                [](const ExperimentConfig& c) { return to_string(c.mode); }}},
      {"construction",
       {[](ExperimentConfig& c, const std::string& v) { c.support.construction = parse_construction(v); },
        [](const ExperimentConfig& c) { return to_string(c.support.construction); }}},
      {"pooling", {[](ExperimentConfig& c, const std::string& v) { c.support.pooling = parse_pooling(v); },
                   [](const ExperimentConfig& c) { return to_string(c.support.pooling); }}},
      SSCS_BOOL_KEY("contrast", use_contrast),
      SSCS_BOOL_KEY("caption", use_caption),
      {"rank_n",
       {[](ExperimentConfig& c, const std::string& v) {
          c.rank_n = parse_list<int>(v, [](const std::string& s) { return static_cast<int>(parse_int("rank_n", s)); });
        },
        [](const ExperimentConfig& c) { return join(c.rank_n); }}},
      {"rank_m",
       {[](ExperimentConfig& c, const std::string& v) {
          c.rank_m = parse_list<double>(v, [](const std::string& s) { return parse_double("rank_m", s); });
        },
        [](const ExperimentConfig& c) { return join(c.rank_m); }}},
      SSCS_DOUBLE_KEY("nms_threshold", nms_threshold),
      {"recall_thresholds",
       {[](ExperimentConfig& c, const std::string& v) {
          c.recall_thresholds =
              parse_list<double>(v, [](const std::string& s) { return parse_double("recall_thresholds", s); });
        },
        [](const ExperimentConfig& c) { return join(c.recall_thresholds); }}},
      {"seed", {[](ExperimentConfig& c, const std::string& v) { c.seed = parse_u64("seed", v); },
                [](const ExperimentConfig& c) { return std::to_string(c.seed); }}},
      SSCS_INT_KEY("threads", threads),
      SSCS_BOOL_KEY("normalize_embeddings", normalize_embeddings),
      SSCS_INT_KEY("dim", dim),
      SSCS_INT_KEY("dim_video", world.dim_video),
      SSCS_INT_KEY("dim_text", dim_text),
      SSCS_INT_KEY("t_max", t_max),
      SSCS_INT_KEY("vocab_size", vocab_size),
      SSCS_INT_KEY("conv_width", conv_width),
      SSCS_INT_KEY("num_clips", world.num_clips),
      SSCS_INT_KEY("n_entities", world.n_entities),
      SSCS_INT_KEY("n_actions", world.n_actions),
      SSCS_INT_KEY("entities_per_video", world.entities_per_video),
      SSCS_DOUBLE_KEY("entity_rate", world.entity_rate),
      SSCS_DOUBLE_KEY("noise_sigma", world.noise_sigma),
      SSCS_DOUBLE_KEY("gt_fraction_min", world.gt_fraction_min),
      SSCS_DOUBLE_KEY("gt_fraction_max", world.gt_fraction_max),
      SSCS_DOUBLE_KEY("distractor_rate", world.distractor_rate),
      SSCS_DOUBLE_KEY("clip_duration_s", world.clip_duration_s),
  };
  return keys;
}

#undef SSCS_INT_KEY
#undef SSCS_DOUBLE_KEY
#undef SSCS_BOOL_KEY

}  // namespace detail

inline void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const auto& keys = detail::config_keys();
  const auto it = keys.find(key);
  if (it == keys.end()) throw ParameterError("unknown config key `" + key + "`");
  it->second.set(cfg, value);
}

inline std::string get_config_value(const ExperimentConfig& cfg, const std::string& key) {
  const auto& keys = detail::config_keys();
  const auto it = keys.find(key);
  if (it == keys.end()) throw ParameterError("unknown config key `" + key + "`");
  return it->second.get(cfg);
}

// Lines are `key = value`; `#` starts a comment.
inline void apply_config_text(ExperimentConfig& cfg, const std::string& text, const std::string& origin = "<config>") {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParameterError(origin + ":" + std::to_string(lineno) + ": expected `key = value`");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    try {
      set_config_value(cfg, key, value);
    } catch (const ParameterError& e) {
      throw ParameterError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  ExperimentConfig cfg;
  apply_config_text(cfg, ss.str(), path);
  return cfg;
}

// Every key in sorted order; parsing this text reproduces the config.
inline std::string canonical_config_text(const ExperimentConfig& cfg) {
  std::ostringstream os;
  for (const auto& [key, k] : detail::config_keys()) os << key << " = " << k.get(cfg) << '\n';
  return os.str();
}

inline std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Excludes `steps` and `threads`, which do not change the model a run builds.
inline std::uint64_t config_hash(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.steps = 0;
  c.threads = 1;
  const std::string text = canonical_config_text(c);
  return fnv1a64(text.data(), text.size());
}

}  // namespace sscs
