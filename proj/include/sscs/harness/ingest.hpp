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

// Precomputed-feature ingestion. A manifest is JSON lines, one sample each:
//   {"video_id": "...", "T": 16, "D_v": 64, "features": "v0.f32",
//    "tokens": [3, 7], "gt": [2.0, 5.5], "clip_duration_s": 1.0}
// Feature files hold T * D_v little-endian float32 values, row-major.
// Relative feature paths resolve against the manifest's directory.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sscs/grounding.hpp"

namespace sscs {

struct ManifestEntry {
  std::string video_id;
  int num_clips = 0;
  int dim_video = 0;
  std::string feature_path;
  std::vector<int> tokens;
  double gt_start_s = 0.0;
  double gt_end_s = 0.0;
  double clip_duration_s = 1.0;
};

inline void write_feature_file(const std::string& path, const Mat& features) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write feature file " + path);
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    for (Eigen::Index c = 0; c < features.cols(); ++c) {
      const auto v = static_cast<float>(features(r, c));
      out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
  }
}

inline Mat read_feature_file(const std::string& path, int num_clips, int dim_video, const std::string& video_id) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) {
    throw DataError("sample " + video_id + ": feature file not found: " + path);
  }
  const auto size = std::filesystem::file_size(path, ec);
  const auto expected = static_cast<std::uintmax_t>(num_clips) * static_cast<std::uintmax_t>(dim_video) * sizeof(float);
  if (ec || size != expected) {
    throw DataError("sample " + video_id + ": feature file " + path + " has " + std::to_string(size) +
                    " bytes, expected " + std::to_string(expected) + " (T * D_v * 4)");
  }
  std::ifstream in(path, std::ios::binary);
  std::vector<float> buf(static_cast<std::size_t>(num_clips) * static_cast<std::size_t>(dim_video));
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!in) throw DataError("sample " + video_id + ": failed reading " + path);
  Mat m(num_clips, dim_video);
  for (int r = 0; r < num_clips; ++r)
    for (int c = 0; c < dim_video; ++c) m(r, c) = static_cast<double>(buf[static_cast<std::size_t>(r) * dim_video + c]);
  return m;
}

inline nlohmann::json to_json(const ManifestEntry& e) {
  return {{"video_id", e.video_id}, {"T", e.num_clips},        {"D_v", e.dim_video},
          {"features", e.feature_path}, {"tokens", e.tokens}, {"gt", {e.gt_start_s, e.gt_end_s}},
          {"clip_duration_s", e.clip_duration_s}};
}

inline void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest " + path);
  for (const auto& e : entries) out << to_json(e).dump() << '\n';
}

inline GroundingSample load_manifest_sample(const ManifestEntry& e, const std::filesystem::path& base) {
  if (e.num_clips < 1 || e.dim_video < 1) throw DataError("sample " + e.video_id + ": T and D_v must be positive");
  if (e.tokens.empty()) throw DataError("sample " + e.video_id + ": empty token list");
  if (!(e.gt_start_s >= 0.0 && e.gt_end_s > e.gt_start_s &&
        e.gt_end_s <= e.num_clips * e.clip_duration_s + 1e-9)) {
    throw DataError("sample " + e.video_id + ": ground truth must satisfy 0 <= t_s < t_e <= T * clip_duration_s");
  }
  std::filesystem::path fp(e.feature_path);
  if (fp.is_relative()) fp = base / fp;
  GroundingSample s;
  s.video_id = e.video_id;
  s.features = read_feature_file(fp.string(), e.num_clips, e.dim_video, e.video_id);
  s.tokens.tokens = e.tokens;
  s.gt_start_s = e.gt_start_s;
  s.gt_end_s = e.gt_end_s;
  s.clip_duration_s = e.clip_duration_s;
  s.gt = seconds_to_clips(e.gt_start_s, e.gt_end_s, e.clip_duration_s, e.num_clips);
  return s;
}

inline std::vector<GroundingSample> ingest_features(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open manifest " + manifest_path);
  const std::filesystem::path base = std::filesystem::path(manifest_path).parent_path();
  std::vector<GroundingSample> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = manifest_path + ":" + std::to_string(lineno);
    ManifestEntry e;
    try {
      const auto j = nlohmann::json::parse(line);
      e.video_id = j.at("video_id").get<std::string>();
      e.num_clips = j.at("T").get<int>();
      e.dim_video = j.at("D_v").get<int>();
      e.feature_path = j.at("features").get<std::string>();
      e.tokens = j.at("tokens").get<std::vector<int>>();
      const auto& gt = j.at("gt");
      if (!gt.is_array() || gt.size() != 2) throw DataError("gt must be [start_s, end_s]");
      e.gt_start_s = gt[0].get<double>();
      e.gt_end_s = gt[1].get<double>();
      e.clip_duration_s = j.value("clip_duration_s", 1.0);
    } catch (const nlohmann::json::exception& ex) {
      throw DataError(where + " (sample " + (e.video_id.empty() ? "?" : e.video_id) + "): malformed entry: " + ex.what());
    } catch (const DataError& ex) {
      throw DataError(where + " (sample " + (e.video_id.empty() ? "?" : e.video_id) + "): " + ex.what());
    }
    out.push_back(load_manifest_sample(e, base));
  }
  return out;
}

}  // namespace sscs
