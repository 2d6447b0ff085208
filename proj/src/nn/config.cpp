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

#include "occpose/nn/config.hpp"

#include <vector>

namespace occpose::nn {

std::string_view to_string(BackboneSize b) {
  switch (b) {
    case BackboneSize::kSmall: return "small";
    case BackboneSize::kMedium: return "medium";
    case BackboneSize::kLarge: return "large";
  }
  return "small";
}

BackboneSize backbone_from_string(std::string_view s) {
  if (s == "small") return BackboneSize::kSmall;
  if (s == "medium") return BackboneSize::kMedium;
  if (s == "large") return BackboneSize::kLarge;
  throw std::invalid_argument("unknown backbone size: " + std::string(s));
}

void ModelConfig::validate() const {
  if (num_keypoints != kNumKeypoints) {
    throw std::invalid_argument("ModelConfig: num_keypoints must be 13");
  }
  if (fpn_levels < 2) throw std::invalid_argument("ModelConfig: fpn_levels must be >= 2");
  if (fpn_channels < 2 || base_width < 2 || pose_channels < 2) {
    throw std::invalid_argument("ModelConfig: channel counts must be >= 2");
  }
  if (roi_size < 2) throw std::invalid_argument("ModelConfig: roi_size must be >= 2");
  if (heatmap_stride < 1 || (heatmap_stride & (heatmap_stride - 1)) != 0) {
    throw std::invalid_argument("ModelConfig: heatmap_stride must be a power of two");
  }
  if (!(grl_lambda >= 0)) throw std::invalid_argument("ModelConfig: grl_lambda must be >= 0");
  if (conv_groups() > 1) {
    for (int l = 0; l < fpn_levels; ++l) {
      if (level_width(l) % conv_groups() != 0) {
        throw std::invalid_argument("ModelConfig: widths must divide into conv groups");
      }
    }
  }
}

int ModelConfig::backbone_blocks() const {
  switch (backbone_size) {
    case BackboneSize::kSmall: return 8;
    case BackboneSize::kMedium: return 14;
    case BackboneSize::kLarge: return 20;
  }
  return 8;
}

std::vector<int> ModelConfig::residual_blocks_per_level() const {
  // One stem conv plus one downsampling conv per additional level.
  int remaining = backbone_blocks() - fpn_levels;
  std::vector<int> per(fpn_levels, 0);
  // Fill coarse levels first: they are cheaper per block.
  for (int i = 0; remaining > 0; ++i, --remaining) {
    per[fpn_levels - 1 - (i % fpn_levels)] += 1;
  }
  return per;
}

}  // namespace occpose::nn
