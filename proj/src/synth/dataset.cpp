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

#include "occpose/synth/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "occpose/core/hash.hpp"
#include "occpose/core/image_io.hpp"
#include "occpose/core/rng.hpp"
#include "occpose/synth/generator.hpp"

namespace occpose::synth {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t sample_seed(std::uint64_t dataset_seed, int index) {
  return derive_seed(dataset_seed, static_cast<std::uint64_t>(index));
}

Dataset build_dataset(const DistributionParams& params, int n, std::uint64_t seed,
                      bool with_pose_oracle) {
  if (n <= 0) throw std::invalid_argument("build_dataset: n must be positive");
  Dataset d;
  d.manifest.params = params;
  d.manifest.seed = seed;
  d.samples.reserve(n);
  for (int i = 0; i < n; ++i) {
    const std::uint64_t s = sample_seed(seed, i);
    d.manifest.sample_seeds.push_back(s);
    d.samples.push_back(generate_sample(params, s));
    if (with_pose_oracle && params.domain == Domain::kTarget) {
      d.pose_oracle.push_back(generate_pose_oracle(params, s));
    }
  }
  return d;
}

std::uint64_t content_hash(const Sample& s) {
  Fnv1a h;
  h.update(s.sample_id);
  h.update_value(static_cast<int>(s.domain));
  h.update_value(s.rng_seed);
  for (const auto& plane : s.image.planes) {
    h.update(plane.data(), static_cast<std::size_t>(plane.size()) * sizeof(float));
  }
  for (const Instance& inst : s.instances) {
    h.update_value(inst.box);
    h.update_value(static_cast<int>(inst.category));
    h.update_value(inst.visibility_ratio);
    h.update(inst.mask.data(), static_cast<std::size_t>(inst.mask.size()));
    if (inst.keypoints) {
      for (const Keypoint& kp : *inst.keypoints) {
        h.update_value(kp.x);
        h.update_value(kp.y);
        h.update_value(static_cast<int>(kp.visibility));
      }
    }
  }
  return h.digest();
}

std::uint64_t Dataset::content_hash() const {
  Fnv1a h;
  h.update_value(manifest.params_hash());
  for (const Sample& s : samples) h.update_value(synth::content_hash(s));
  for (const auto& per_sample : pose_oracle) {
    for (const Keypoints& kps : per_sample) {
      for (const Keypoint& kp : kps) {
        h.update_value(kp.x);
        h.update_value(kp.y);
        h.update_value(static_cast<int>(kp.visibility));
      }
    }
  }
  return h.digest();
}

namespace {

json params_to_json(const DistributionParams& p) {
  return {{"domain", std::string(to_string(p.domain))},
          {"image_height", p.image_height},
          {"image_width", p.image_width},
          {"min_pedestrians", p.min_pedestrians},
          {"max_pedestrians", p.max_pedestrians},
          {"limb_length_scale", p.limb_length_scale},
          {"limb_width", p.limb_width},
          {"body_hue", p.body_hue},
          {"background_texture_scale", p.background_texture_scale},
          {"noise_level", p.noise_level},
          {"occluder_rate", p.occluder_rate},
          {"rider_rate", p.rider_rate},
          {"allow_overlap", p.allow_overlap}};
}

DistributionParams params_from_json(const json& j) {
  DistributionParams p;
  p.domain = domain_from_string(j.at("domain").get<std::string>());
  p.image_height = j.at("image_height");
  p.image_width = j.at("image_width");
  p.min_pedestrians = j.at("min_pedestrians");
  p.max_pedestrians = j.at("max_pedestrians");
  p.limb_length_scale = j.at("limb_length_scale");
  p.limb_width = j.at("limb_width");
  p.body_hue = j.at("body_hue");
  p.background_texture_scale = j.at("background_texture_scale");
  p.noise_level = j.at("noise_level");
  p.occluder_rate = j.at("occluder_rate");
  p.rider_rate = j.at("rider_rate");
  p.allow_overlap = j.at("allow_overlap");
  return p;
}

// Row-major run lengths, alternating unset/set, starting with unset.
std::vector<std::int64_t> encode_rle(const Mask& m) {
  std::vector<std::int64_t> runs;
  std::uint8_t current = 0;
  std::int64_t run = 0;
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const std::uint8_t v = m.data()[i] ? 1 : 0;
    if (v != current) {
      runs.push_back(run);
      run = 0;
      current = v;
    }
    ++run;
  }
  runs.push_back(run);
  return runs;
}

Mask decode_rle(const std::vector<std::int64_t>& runs, int h, int w) {
  Mask m = Mask::Zero(h, w);
  std::int64_t pos = 0;
  std::uint8_t v = 0;
  for (std::int64_t run : runs) {
    if (pos + run > m.size()) throw std::runtime_error("mask RLE overruns raster");
    for (std::int64_t i = 0; i < run; ++i) m.data()[pos + i] = v;
    pos += run;
    v ^= 1;
  }
  if (pos != m.size()) throw std::runtime_error("mask RLE does not cover raster");
  return m;
}

json keypoints_to_json(const Keypoints& kps) {
  json arr = json::array();
  for (const Keypoint& kp : kps) {
    arr.push_back({kp.x, kp.y, static_cast<int>(kp.visibility)});
  }
  return arr;
}

Keypoints keypoints_from_json(const json& arr) {
  if (arr.size() != kNumKeypoints) throw std::runtime_error("expected 13 keypoints");
  Keypoints kps{};
  for (int k = 0; k < kNumKeypoints; ++k) {
    kps[k].x = arr[k][0];
    kps[k].y = arr[k][1];
    const int v = arr[k][2];
    if (v < 0 || v > 2) throw std::runtime_error("bad keypoint visibility");
    kps[k].visibility = static_cast<Visibility>(v);
  }
  return kps;
}

json sample_to_json(const Sample& s) {
  json inst_arr = json::array();
  for (const Instance& inst : s.instances) {
    json j = {{"box", {inst.box.x0, inst.box.y0, inst.box.x1, inst.box.y1}},
              {"category", std::string(to_string(inst.category))},
              {"visibility_ratio", inst.visibility_ratio},
              {"mask_rle", encode_rle(inst.mask)}};
    if (inst.keypoints) j["keypoints"] = keypoints_to_json(*inst.keypoints);
    inst_arr.push_back(std::move(j));
  }
  return {{"schema_version", kDatasetSchemaVersion},
          {"sample_id", s.sample_id},
          {"domain", std::string(to_string(s.domain))},
          {"rng_seed", s.rng_seed},
          {"height", s.image.height},
          {"width", s.image.width},
          {"instances", std::move(inst_arr)}};
}

Sample sample_from_json(const json& j, Image image) {
  if (j.at("schema_version").get<int>() != kDatasetSchemaVersion) {
    throw std::runtime_error("unsupported annotation schema version");
  }
  Sample s;
  s.sample_id = j.at("sample_id").get<std::string>();
  s.domain = domain_from_string(j.at("domain").get<std::string>());
  s.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  const int h = j.at("height"), w = j.at("width");
  if (image.height != h || image.width != w) {
    throw std::runtime_error("image size disagrees with annotation: " + s.sample_id);
  }
  s.image = std::move(image);
  for (const json& ji : j.at("instances")) {
    Instance inst;
    const auto& b = ji.at("box");
    inst.box = {b[0], b[1], b[2], b[3]};
    inst.category = category_from_string(ji.at("category").get<std::string>());
    inst.visibility_ratio = ji.at("visibility_ratio");
    inst.mask = decode_rle(ji.at("mask_rle").get<std::vector<std::int64_t>>(), h, w);
    if (ji.contains("keypoints")) inst.keypoints = keypoints_from_json(ji.at("keypoints"));
    s.instances.push_back(std::move(inst));
  }
  return s;
}

std::string index_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu", i);
  return buf;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(1) << "\n";
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return json::parse(in);
}

}  // namespace

void write_dataset(const fs::path& dir, const Dataset& d) {
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "annotations");
  json seeds = json::array();
  for (std::uint64_t s : d.manifest.sample_seeds) seeds.push_back(s);
  const json manifest = {{"schema_version", d.manifest.schema_version},
                         {"params", params_to_json(d.manifest.params)},
                         {"params_hash", hex64(d.manifest.params_hash())},
                         {"seed", d.manifest.seed},
                         {"num_samples", d.samples.size()},
                         {"sample_seeds", seeds},
                         {"has_pose_oracle", !d.pose_oracle.empty()},
                         {"content_hash", hex64(d.content_hash())}};
  write_json(dir / "manifest.json", manifest);
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    const std::string name = index_name(i);
    write_png(dir / "images" / (name + ".png"), d.samples[i].image);
    write_json(dir / "annotations" / (name + ".json"), sample_to_json(d.samples[i]));
  }
  if (!d.pose_oracle.empty()) {
    fs::create_directories(dir / "oracle");
    for (std::size_t i = 0; i < d.pose_oracle.size(); ++i) {
      json arr = json::array();
      for (const Keypoints& kps : d.pose_oracle[i]) arr.push_back(keypoints_to_json(kps));
      write_json(dir / "oracle" / (index_name(i) + ".json"), arr);
    }
  }
}

Dataset read_dataset(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.json")) {
    throw std::runtime_error("no dataset manifest in " + dir.string());
  }
  const json manifest = read_json(dir / "manifest.json");
  if (manifest.at("schema_version").get<int>() != kDatasetSchemaVersion) {
    throw std::runtime_error("unsupported dataset schema version in " + dir.string());
  }
  Dataset d;
  d.manifest.params = params_from_json(manifest.at("params"));
  d.manifest.seed = manifest.at("seed").get<std::uint64_t>();
  d.manifest.sample_seeds = manifest.at("sample_seeds").get<std::vector<std::uint64_t>>();
  const std::size_t n = manifest.at("num_samples");
  for (std::size_t i = 0; i < n; ++i) {
    const std::string name = index_name(i);
    d.samples.push_back(sample_from_json(read_json(dir / "annotations" / (name + ".json")),
                                         read_png(dir / "images" / (name + ".png"))));
  }
  if (manifest.value("has_pose_oracle", false)) {
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<Keypoints> per;
      for (const json& kj : read_json(dir / "oracle" / (index_name(i) + ".json"))) {
        per.push_back(keypoints_from_json(kj));
      }
      d.pose_oracle.push_back(std::move(per));
    }
  }
  return d;
}

}  // namespace occpose::synth
