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

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "occpose/core/types.hpp"

namespace occpose::nn {

/// Desk-scale stand-ins for ResNet-50 / ResNet-101 / ResNeXt-101.
enum class BackboneSize { kSmall, kMedium, kLarge };

std::string_view to_string(BackboneSize b);
BackboneSize backbone_from_string(std::string_view s);

struct ModelConfig {
  BackboneSize backbone_size = BackboneSize::kSmall;
  int fpn_levels = 3;
  int fpn_channels = 16;
  int base_width = 16;       // encoder width at the finest level
  int pose_channels = 32;
  int heatmap_stride = 2;    // pose decoder upsampling over the ROI grid
  int roi_size = 14;
  double grl_lambda = 1.0;
  int num_keypoints = kNumKeypoints;
  std::uint64_t init_seed = 1;

  void validate() const;

  /// Total conv blocks in one encoder: 8, 14 or 20.
  int backbone_blocks() const;
  /// Residual blocks per pyramid level (the stem and the stride-2
  /// downsampling convolutions account for the rest).
  std::vector<int> residual_blocks_per_level() const;
  int conv_groups() const { return backbone_size == BackboneSize::kLarge ? 2 : 1; }
  int level_width(int level) const { return base_width + base_width * level / 2; }
  /// Image pixels per cell of pyramid level 0.
  static constexpr int kFinestStride = 2;
  int heatmap_size() const { return roi_size * heatmap_stride; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Names of the independently addressable sub-networks.
inline constexpr std::array<std::string_view, 9> kComponentNames = {
    "enc_c", "enc_m", "det_c", "det_m", "seg_c", "seg_m",
    "pose_enc", "pose_dec", "dom_cls"};

/// Source samples flow through the M-side MTL network, target through C.
inline std::string_view encoder_name(Domain d) { return d == Domain::kSource ? "enc_m" : "enc_c"; }
inline std::string_view detector_name(Domain d) { return d == Domain::kSource ? "det_m" : "det_c"; }
inline std::string_view segmenter_name(Domain d) { return d == Domain::kSource ? "seg_m" : "seg_c"; }

}  // namespace occpose::nn
