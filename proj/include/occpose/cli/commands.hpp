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

#include "occpose/cli/run_config.hpp"

namespace occpose::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitMissingInput = 3,
  kExitInconsistent = 4,
};

/// OCCPOSE_OUT when set, otherwise ./occpose_out.
std::filesystem::path output_root();

struct CommonArgs {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
};

struct GenDataArgs : CommonArgs {
  std::optional<int> n_train, n_eval;
  bool force = false;
};

struct TrainArgs : CommonArgs {
  std::optional<std::filesystem::path> data;
  std::optional<double> beta;
  std::optional<int> stage2_steps;
  bool smoke = false;
  bool resume = false;
};

struct EvalArgs : CommonArgs {
  std::optional<std::filesystem::path> data;
  std::optional<std::filesystem::path> run;
  std::optional<std::filesystem::path> checkpoint;
  bool occlusion_sweep = false;
  bool ablate_backbone = false;
};

struct PlotArgs : CommonArgs {
  std::optional<std::filesystem::path> data;
  std::optional<std::filesystem::path> run;
  int overlays = 4;
};

// Each command reports errors on stderr and returns an ExitCode.
int cmd_gen_data(const GenDataArgs& args);
int cmd_train(const TrainArgs& args);
int cmd_eval(const EvalArgs& args);
int cmd_plot(const PlotArgs& args);

/// Names of the four split directories written by gen-data.
inline constexpr const char* kSplitNames[4] = {"source_train", "source_eval", "target_train",
                                               "target_eval"};

}  // namespace occpose::cli
