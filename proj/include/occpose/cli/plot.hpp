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

#include <string>
#include <vector>

#include "occpose/core/types.hpp"
#include "occpose/metrics/evaluate.hpp"
#include "occpose/metrics/inference.hpp"

namespace occpose::cli {

/// Total loss against global step, one polyline vertex per logged step.
std::string loss_curve_svg(const std::vector<long>& steps, const std::vector<double>& losses);

/// Mean AP per occlusion fraction with +/- one std error bars and one
/// x-tick per fraction.
std::string occlusion_svg(const std::vector<metrics::SweepPoint>& sweep);

/// Copy of the image with predicted boxes and skeletons drawn on top.
Image draw_overlay(const Image& image, const std::vector<metrics::InstancePrediction>& preds);

}  // namespace occpose::cli
