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

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "occpose/core/types.hpp"
#include "occpose/synth/params.hpp"

namespace occpose::synth {

inline constexpr int kDatasetSchemaVersion = 1;

struct Manifest {
  int schema_version = kDatasetSchemaVersion;
  DistributionParams params;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> sample_seeds;

  std::uint64_t params_hash() const { return params.hash(); }
};

struct Dataset {
  Manifest manifest;
  std::vector<Sample> samples;
  /// Target-domain ground truth used only by evaluation; empty for source.
  std::vector<std::vector<Keypoints>> pose_oracle;

  std::size_t size() const { return samples.size(); }
  /// Content hash over every sample raster and annotation.
  std::uint64_t content_hash() const;
};

/// n samples with seeds derive_seed(seed, i). Throws on n <= 0.
Dataset build_dataset(const DistributionParams& params, int n,
                      std::uint64_t seed, bool with_pose_oracle = false);

/// Per-sample seed used by build_dataset.
std::uint64_t sample_seed(std::uint64_t dataset_seed, int index);

// On-disk layout of one split directory:
//   manifest.json                 schema, params, params hash, seeds
//   images/<index>.png            8-bit RGB, lossless
//   annotations/<index>.json      one record per sample
//   oracle/<index>.json           target-domain pose oracle (optional)
void write_dataset(const std::filesystem::path& dir, const Dataset& d);
Dataset read_dataset(const std::filesystem::path& dir);

std::uint64_t content_hash(const Sample& s);

}  // namespace occpose::synth
