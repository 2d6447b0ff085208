// Copyright 2026 The OccPose Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "occpose/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace occpose::nn {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'O', 'C', 'P', 'K'};
constexpr std::string_view kMomentumPrefix = "momentum.";

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open for writing: " + path.string());
  }
  template <typename T>
  void pod(const T& v) { out_.write(reinterpret_cast<const char*>(&v), sizeof(T)); }
  void str(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), n); }
  void finish() {
    out_.flush();
    if (!out_) throw std::runtime_error("checkpoint write failed");
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
    if (!in_) throw std::runtime_error("cannot open checkpoint: " + path.string());
  }
  template <typename T>
  T pod() {
    T v{};
    read(&v, sizeof(T));
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    if (n > (1u << 28)) throw std::runtime_error("checkpoint: corrupt string length");
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  void read(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in_) throw std::runtime_error("checkpoint: truncated file");
  }

 private:
  std::ifstream in_;
};

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    Writer w(tmp);
    w.bytes(kMagic, 4);
    w.pod(kCheckpointVersion);
    w.pod(ckpt.step);
    w.str(ckpt.config_text);
    w.pod(static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& [component, params] : ckpt.tensors) {
      w.str(component);
      w.pod(static_cast<std::uint32_t>(params.size()));
      for (const auto& [name, m] : params) {
        w.str(name);
        w.pod(static_cast<std::uint32_t>(m.rows()));
        w.pod(static_cast<std::uint32_t>(m.cols()));
        w.bytes(m.data(), static_cast<std::size_t>(m.size()) * sizeof(float));
      }
    }
    w.finish();
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  char magic[4];
  r.read(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("not a checkpoint: " + path.string());
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.step = r.pod<std::uint64_t>();
  ckpt.config_text = r.str();
  const auto n_components = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_components; ++i) {
    const std::string component = r.str();
    const auto n_params = r.pod<std::uint32_t>();
    auto& params = ckpt.tensors[component];
    for (std::uint32_t j = 0; j < n_params; ++j) {
      const std::string name = r.str();
      const auto rows = r.pod<std::uint32_t>(), cols = r.pod<std::uint32_t>();
      Matrix<float> m(rows, cols);
      r.read(m.data(), static_cast<std::size_t>(m.size()) * sizeof(float));
      params.emplace(name, std::move(m));
    }
  }
  return ckpt;
}

ParamTable export_parameters(const Model<float>& model) {
  ParamTable t;
  model.visit_params([&](std::string_view c, const std::string& n, Param<float>& p) {
    t[std::string(c)][n] = p.value;
  });
  return t;
}

void import_parameters(Model<float>& model, const ParamTable& tensors) {
  std::size_t seen = 0;
  model.visit_params([&](std::string_view c, const std::string& n, Param<float>& p) {
    const auto ci = tensors.find(std::string(c));
    if (ci == tensors.end()) throw CheckpointMismatch("checkpoint lacks component " + std::string(c));
    const auto pi = ci->second.find(n);
    if (pi == ci->second.end() || pi->second.rows() != p.value.rows() ||
        pi->second.cols() != p.value.cols()) {
      throw CheckpointMismatch("checkpoint parameter missing or misshapen: " + std::string(c) +
                               "/" + n);
    }
    p.value = pi->second;
    ++seen;
  });
  std::size_t stored = 0;
  for (const auto& [c, params] : tensors) {
    if (!c.starts_with(kMomentumPrefix)) stored += params.size();
  }
  if (stored != seen) throw CheckpointMismatch("checkpoint holds parameters the model lacks");
}

Checkpoint make_checkpoint(const Model<float>& model, const MomentumSgd<float>* opt,
                           std::uint64_t step, std::string config_text) {
  Checkpoint ckpt;
  ckpt.step = step;
  ckpt.config_text = std::move(config_text);
  ckpt.tensors = export_parameters(model);
  if (opt) {
    for (const auto& [c, params] : opt->buffers()) {
      ckpt.tensors[std::string(kMomentumPrefix) + c] = params;
    }
  }
  return ckpt;
}

void restore_checkpoint(const Checkpoint& ckpt, Model<float>& model, MomentumSgd<float>* opt) {
  import_parameters(model, ckpt.tensors);
  if (!opt) return;
  opt->buffers().clear();
  for (const auto& [c, params] : ckpt.tensors) {
    if (c.starts_with(kMomentumPrefix)) {
      opt->buffers()[c.substr(kMomentumPrefix.size())] = params;
    }
  }
}

}  // namespace occpose::nn
