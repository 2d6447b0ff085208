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

#include "occpose/train/config.hpp"

#include <cmath>
#include <stdexcept>

namespace occpose::train {

void TrainConfig::validate() const {
  if (!(lr0 > 0)) throw std::invalid_argument("TrainConfig: lr0 must be > 0");
  if (!(momentum >= 0 && momentum < 1)) throw std::invalid_argument("TrainConfig: momentum must be in [0,1)");
  if (decay_every <= 0) throw std::invalid_argument("TrainConfig: decay_every must be > 0");
  if (!(decay_factor >= 1)) throw std::invalid_argument("TrainConfig: decay_factor must be >= 1");
  if (batch_size != 1) throw std::invalid_argument("TrainConfig: batch_size must be 1");
  if (stage1_steps < 0 || stage2_steps < 0) throw std::invalid_argument("TrainConfig: negative step count");
  if (!(mask_start >= 0 && mask_start <= mask_end && mask_end < 1)) {
    throw std::invalid_argument("TrainConfig: need 0 <= mask_start <= mask_end < 1");
  }
  if (curriculum != "linear") throw std::invalid_argument("TrainConfig: curriculum must be linear");
  if (weights.alpha < 0 || weights.beta < 0 || weights.gamma < 0) {
    throw std::invalid_argument("TrainConfig: loss weights must be non-negative");
  }
  if (!(heatmap_sigma > 0)) throw std::invalid_argument("TrainConfig: heatmap_sigma must be > 0");
  if (checkpoint_every < 0) throw std::invalid_argument("TrainConfig: checkpoint_every must be >= 0");
}

double lr_schedule(long step, const TrainConfig& cfg) {
  if (step < 0) throw std::invalid_argument("lr_schedule: negative step");
  return cfg.lr0 / std::pow(cfg.decay_factor, static_cast<double>(step / cfg.decay_every));
}

double mask_schedule(long step, long total, double p_start, double p_end) {
  if (step < 0 || step > total) throw std::invalid_argument("mask_schedule: step outside [0, total]");
  if (total == 0 || step == total) return total == 0 ? p_start : p_end;
  return p_start + (p_end - p_start) * static_cast<double>(step) / static_cast<double>(total);
}

}  // namespace occpose::train
