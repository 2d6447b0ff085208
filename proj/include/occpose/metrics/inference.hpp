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

#include <optional>
#include <vector>

#include "occpose/core/types.hpp"
#include "occpose/nn/detection.hpp"
#include "occpose/nn/model.hpp"

namespace occpose::metrics {

struct InferenceOptions {
  double score_threshold = 0.3;
  double nms_iou = 0.5;
  int max_detections = 20;
  double keypoint_threshold = 0.1;
};

struct InstancePrediction {
  nn::Detection detection;
  Mask mask;
  /// The segmentation map left the box empty; `mask` is the box raster.
  bool mask_from_box = false;
  /// Absent when the box is too small for the pose branch.
  std::optional<Keypoints> keypoints;
};

/// Detection, instance masks and poses for one image, run through the
/// network of the sample's domain.
std::vector<InstancePrediction> predict(nn::Model<float>& model, const Sample& s,
                                        const InferenceOptions& opts = {});

/// Raster of the pixels whose centres lie inside `box`.
Mask box_mask(const Box& box, int height, int width);

}  // namespace occpose::metrics
