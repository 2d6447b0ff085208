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
#include <string>

#include "occpose/losses/losses.hpp"

namespace occpose::train {

struct AugmentToggles {
  bool flip = true;
  bool blur = true;
  bool brightness = true;
  friend bool operator==(const AugmentToggles&, const AugmentToggles&) = default;
};

struct TrainConfig {
  double lr0 = 0.01;
  double momentum = 0.9;
  int decay_every = 1500;
  double decay_factor = 10.0;
  int batch_size = 1;
  int stage1_steps = 600;   // per domain
  int stage2_steps = 5000;
  double mask_start = 0.0;
  double mask_end = 0.5;
  std::string curriculum = "linear";
  losses::LossWeights weights;
  std::uint64_t seed = 1;
  AugmentToggles augment;
  double heatmap_sigma = 2.0;     // heatmap cells
  int checkpoint_every = 1000;    // global steps; 0 disables periodic saves
  /// During stage 2 the ROI mask comes from the segmentation output unless it
  /// covers less than this fraction of the annotated mask.
  double min_mask_overlap = 0.25;

  void validate() const;
  long total_steps() const { return 2L * stage1_steps + stage2_steps; }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// lr0 / decay_factor^floor(step / decay_every)
double lr_schedule(long step, const TrainConfig& cfg);

/// Linear ramp from p_start at step 0 to p_end at step == total.
double mask_schedule(long step, long total, double p_start, double p_end);

}  // namespace occpose::train
