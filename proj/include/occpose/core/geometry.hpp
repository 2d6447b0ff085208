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

#include "occpose/core/types.hpp"

namespace occpose {

/// Intersection over union of two valid boxes.
double box_iou(const Box& a, const Box& b);

/// |a & b| / |a | b|. Two empty rasters have IoU 1 by convention.
/// Throws std::invalid_argument on a shape mismatch.
double mask_iou(const Mask& a, const Mask& b);

}  // namespace occpose
