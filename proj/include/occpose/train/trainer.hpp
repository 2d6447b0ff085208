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
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "occpose/losses/losses.hpp"
#include "occpose/nn/checkpoint.hpp"
#include "occpose/nn/model.hpp"
#include "occpose/nn/optimizer.hpp"
#include "occpose/synth/dataset.hpp"
#include "occpose/train/config.hpp"

namespace occpose::train {

using nn::Model;
using nn::ModelConfig;

struct StepReport {
  long step = 0;          // global step index
  int stage = 1;
  Domain domain = Domain::kSource;
  losses::LossBreakdown loss;
  double lr = 0;
  double mask_fraction = 0;
  double wall_ms = 0;
  int instances = 0;      // instances fed to the pose branch
  bool skipped = false;
  bool no_positive = false;
  std::vector<std::string> updated;
};

/// One JSON object per line. Wall time is the only non-deterministic field.
std::string to_json_line(const StepReport& r, const losses::LossWeights& w);
StepReport step_report_from_json(const std::string& line);

/// Components a step may modify. Components whose loss coefficient is zero
/// are left out, so their parameters stay bit-identical.
std::set<std::string> stage1_components(Domain d);
std::set<std::string> stage2_components(Domain d, const losses::LossWeights& w);

/// Curriculum block covering round(fraction * roi^2) cells, placed at random.
nn::BlockMask<float>::Rect curriculum_block(double fraction, int roi, std::uint64_t seed);

/// Index of the k-th draw from a stream over n items: one shuffled pass per
/// epoch, each epoch seeded independently.
int stream_index(std::uint64_t seed, std::uint64_t stream, long k, int n);

class Trainer {
 public:
  Trainer(const ModelConfig& model_cfg, const TrainConfig& cfg);

  Model<float>& model() { return model_; }
  const Model<float>& model() const { return model_; }
  nn::MomentumSgd<float>& optimizer() { return opt_; }
  const TrainConfig& config() const { return cfg_; }
  TrainConfig& mutable_config() { return cfg_; }

  /// L_det + alpha L_seg on one sample of the sample's domain.
  StepReport pretrain_step(const Sample& s, long local_step, long global_step);

  /// One stage-2 update. Target samples do not touch the pose decoder.
  StepReport stage2_step(const Sample& s, long local_step, long global_step);

  /// Applies stage1_steps pretraining updates on one domain's dataset.
  std::vector<StepReport> pretrain_mtl(const synth::Dataset& data, long first_global_step = 0);

  /// Augmented copy of a training sample for a given global step.
  Sample training_view(const Sample& s, long global_step) const;

 private:
  ModelConfig model_cfg_;
  TrainConfig cfg_;
  Model<float> model_;
  nn::MomentumSgd<float> opt_;
};

struct RunOptions {
  std::optional<std::filesystem::path> run_dir;   // logs and checkpoints
  bool resume = false;
  /// Stop after this many global steps (simulates an interrupted run).
  std::optional<long> stop_after;
  std::string config_text;                        // embedded in checkpoints
  std::function<void(const StepReport&)> on_step;
};

struct TrainResult {
  std::vector<StepReport> history;   // steps executed by this call
  long steps_done = 0;
  std::uint64_t parameter_hash = 0;
  std::optional<std::filesystem::path> final_checkpoint;
};

/// Stage 1 on source then target, then stage-2 alternation (even steps
/// source, odd steps target). Deterministic given the configs.
TrainResult run_training(Trainer& trainer, const synth::Dataset& source,
                         const synth::Dataset& target, const RunOptions& opts = {});

std::optional<std::filesystem::path> latest_checkpoint(const std::filesystem::path& run_dir);

}  // namespace occpose::train
