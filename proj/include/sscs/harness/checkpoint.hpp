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

// Binary checkpoints: parameters, optimizer and scheduler state, step counter
// and the hash of the config that produced them. Little-endian doubles are
// written verbatim so a round trip is bit-exact; a trailing FNV-1a checksum
// detects truncation and corruption.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sscs/harness/config.hpp"
#include "sscs/harness/model.hpp"
#include "sscs/harness/optim.hpp"

namespace sscs {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

struct Checkpoint {
  ModelParams params;
  AdamOptimizer adam;
  PlateauScheduler scheduler;
  long long step = 0;
  std::uint64_t config_hash = 0;
};

namespace detail {

inline constexpr char kCheckpointMagic[8] = {'S', 'S', 'C', 'S', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class ByteWriter {
 public:
  template <class T>
  void put(const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const char*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  void put_string(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    put_bytes(s.data(), s.size());
  }
  void put_matrix(const Eigen::Ref<const Mat>& m) {
    put(static_cast<std::int64_t>(m.rows()));
    put(static_cast<std::int64_t>(m.cols()));
    const Mat dense = m;
    put_bytes(dense.data(), sizeof(double) * static_cast<std::size_t>(dense.size()));
  }
  const std::vector<char>& bytes() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class ByteReader {
 public:
  ByteReader(const char* data, std::size_t n) : data_(data), n_(n) {}

  template <class T>
  T get() {
    T v;
    need(sizeof(T));
    std::memcpy(&v, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string() {
    const auto len = get<std::uint32_t>();
    need(len);
    std::string s(data_ + pos_, len);
    pos_ += len;
    return s;
  }
  Mat get_matrix() {
    const auto rows = get<std::int64_t>();
    const auto cols = get<std::int64_t>();
    if (rows < 0 || cols < 0) throw DataError("checkpoint: negative matrix shape");
    const auto count = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    need(count * sizeof(double));
    Mat m(rows, cols);
    std::memcpy(m.data(), data_ + pos_, count * sizeof(double));
    pos_ += count * sizeof(double);
    return m;
  }
  bool done() const { return pos_ == n_; }

 private:
  void need(std::size_t k) const {
    if (pos_ + k > n_) throw DataError("checkpoint: truncated file");
  }
  const char* data_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<char> serialize_checkpoint(const Checkpoint& ck) {
  detail::ByteWriter w;
  w.put_bytes(detail::kCheckpointMagic, sizeof(detail::kCheckpointMagic));
  w.put(detail::kCheckpointVersion);
  w.put(ck.config_hash);
  w.put(static_cast<std::int64_t>(ck.step));
  w.put(ck.scheduler.lr);
  w.put(ck.scheduler.best);
  w.put(static_cast<std::int32_t>(ck.scheduler.bad_evaluations));
  w.put(static_cast<std::int64_t>(ck.adam.step_count));
  std::vector<std::pair<std::string, Mat>> params;
  ck.params.for_each([&](const std::string& k, const Eigen::Map<const Mat>& m) { params.emplace_back(k, m); });
  w.put(static_cast<std::uint32_t>(params.size()));
  for (const auto& [k, m] : params) {
    w.put_string(k);
    w.put_matrix(m);
  }
  for (const auto* moments : {&ck.adam.first, &ck.adam.second}) {
    w.put(static_cast<std::uint32_t>(moments->size()));
    for (const auto& [k, m] : *moments) {
      w.put_string(k);
      w.put_matrix(m);
    }
  }
  std::vector<char> out = w.bytes();
  const std::uint64_t sum = fnv1a64(out.data(), out.size());
  const auto* p = reinterpret_cast<const char*>(&sum);
  out.insert(out.end(), p, p + sizeof(sum));
  return out;
}

// `skeleton` supplies the non-trainable pooling settings and expected shapes.
inline Checkpoint deserialize_checkpoint(const std::vector<char>& bytes, const ModelParams& skeleton) {
  if (bytes.size() < sizeof(detail::kCheckpointMagic) + sizeof(std::uint64_t)) {
    throw DataError("checkpoint: file too short");
  }
  const std::size_t body = bytes.size() - sizeof(std::uint64_t);
  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + body, sizeof(stored));
  if (std::memcmp(bytes.data(), detail::kCheckpointMagic, sizeof(detail::kCheckpointMagic)) != 0) {
    throw DataError("checkpoint: bad magic");
  }
  if (fnv1a64(bytes.data(), body) != stored) throw DataError("checkpoint: checksum mismatch (truncated or corrupt)");

  detail::ByteReader r(bytes.data() + sizeof(detail::kCheckpointMagic), body - sizeof(detail::kCheckpointMagic));
  if (r.get<std::uint32_t>() != detail::kCheckpointVersion) throw DataError("checkpoint: unsupported version");
  Checkpoint ck;
  ck.params = skeleton;
  ck.config_hash = r.get<std::uint64_t>();
  ck.step = r.get<std::int64_t>();
  ck.scheduler.lr = r.get<double>();
  ck.scheduler.best = r.get<double>();
  ck.scheduler.bad_evaluations = r.get<std::int32_t>();
  ck.adam.step_count = r.get<std::int64_t>();
  std::map<std::string, Mat> loaded;
  const auto n_params = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_params; ++i) {
    std::string k = r.get_string();
    loaded.emplace(std::move(k), r.get_matrix());
  }
  ck.params.for_each([&](const std::string& k, Eigen::Map<Mat> m) {
    const auto it = loaded.find(k);
    if (it == loaded.end()) throw DataError("checkpoint: missing parameter " + k);
    if (it->second.rows() != m.rows() || it->second.cols() != m.cols()) {
      throw DataError("checkpoint: shape mismatch for parameter " + k);
    }
    m = it->second;
  });
  for (auto* moments : {&ck.adam.first, &ck.adam.second}) {
    const auto n = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n; ++i) {
      std::string k = r.get_string();
      moments->emplace(std::move(k), r.get_matrix());
    }
  }
  if (!r.done()) throw DataError("checkpoint: trailing bytes");
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  const std::vector<char> bytes = serialize_checkpoint(ck);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint " + path);
}

inline Checkpoint load_checkpoint(const std::string& path, const ModelParams& skeleton) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return deserialize_checkpoint(bytes, skeleton);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

// Non-empty when the checkpoint was produced under a different config.
inline std::optional<std::string> config_mismatch_warning(const Checkpoint& ck, const ExperimentConfig& cfg) {
  const std::uint64_t h = config_hash(cfg);
  if (h == ck.config_hash) return std::nullopt;
  std::ostringstream os;
  os << "warning: checkpoint config hash " << std::hex << ck.config_hash << " differs from current config hash " << h;
  return os.str();
}

}  // namespace sscs
