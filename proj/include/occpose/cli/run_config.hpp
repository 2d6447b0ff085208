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
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "occpose/metrics/evaluate.hpp"
#include "occpose/nn/config.hpp"
#include "occpose/synth/params.hpp"
#include "occpose/train/config.hpp"

namespace occpose::cli {

inline constexpr const char* kVersion = "occpose 0.1.0";

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Everything a run depends on. Serialises to the flat config format.
struct RunConfig {
  synth::DistributionParams source = synth::DistributionParams::source_preset();
  synth::DistributionParams target = synth::DistributionParams::target_preset();
  int n_train = 200;
  int n_eval = 60;
  std::uint64_t data_seed = 7;
  std::string data_dir;   // empty: <output root>/data
  nn::ModelConfig model;
  train::TrainConfig train;
  metrics::EvalOptions eval;
  std::string out_dir;    // empty: chosen by the command

  void validate() const;
};

bool operator==(const RunConfig& a, const RunConfig& b);

/// Ordered key/value pairs; later entries override earlier ones.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Parses `key = value` lines, `# comments` and `include <path>` directives.
/// Included paths resolve against `base_dir`.
KeyValues parse_config_text(const std::string& text, const std::filesystem::path& base_dir = ".");
KeyValues load_config_file(const std::filesystem::path& path);

/// Applies the pairs over `base`. Unknown keys and malformed values throw.
RunConfig apply_config(const KeyValues& kv, RunConfig base = {});
std::string to_config_text(const RunConfig& c);

/// Every recognised key, in serialisation order.
std::vector<std::string> config_keys();

}  // namespace occpose::cli
