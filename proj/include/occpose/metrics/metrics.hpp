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
#include <limits>
#include <optional>
#include <vector>

#include "occpose/core/types.hpp"

namespace occpose::metrics {

/// Per-keypoint OKS tolerances: twice the COCO sigmas of the retained joints.
struct KappaTable {
  std::array<double, kNumKeypoints> kappa{};
  static KappaTable coco();
};

/// Mean over labeled gt keypoints of exp(-d^2 / (2 area kappa^2)).
/// Throws when area <= 0 or no gt keypoint is labeled.
double oks(const Keypoints& pred, const Keypoints& gt, double area,
           const KappaTable& kappas = KappaTable::coco());

struct AreaRange {
  double lo = 0;
  double hi = std::numeric_limits<double>::infinity();
  bool contains(double a) const { return a >= lo && a < hi; }
};
inline constexpr AreaRange kAreaAll{};
inline constexpr AreaRange kAreaMedium{32.0 * 32.0, 96.0 * 96.0};
inline constexpr AreaRange kAreaLarge{96.0 * 96.0, std::numeric_limits<double>::infinity()};

struct KeypointGt {
  Keypoints keypoints{};
  double area = 0;
  bool ignore = false;
};

struct KeypointPrediction {
  Keypoints keypoints{};
  double score = 0;
  double area = 0;   // of the predicted box; decides area-range filtering
};

struct KeypointImage {
  std::vector<KeypointGt> gts;
  std::vector<KeypointPrediction> preds;
};

/// Default OKS thresholds 0.50:0.05:0.95.
std::vector<double> default_oks_thresholds();

/// 101-point interpolated AP at one OKS threshold; nullopt when no gt is
/// evaluable (all ignored or outside the area range).
std::optional<double> keypoint_ap_at(const std::vector<KeypointImage>& images, double threshold,
                                     AreaRange range = kAreaAll,
                                     const KappaTable& kappas = KappaTable::coco(),
                                     int max_detections = 20);

struct ApSuite {
  std::optional<double> ap, ap50, ap75, ap_m, ap_l;
};

ApSuite keypoint_ap(const std::vector<KeypointImage>& images,
                    const KappaTable& kappas = KappaTable::coco());

/// Area under a precision/recall sequence sampled at the recall points
/// 0, 0.01, ..., 1 after making precision non-increasing.
double interpolated_ap(const std::vector<double>& recall, const std::vector<double>& precision);

// --- miss rate -----------------------------------------------------------

enum class VisibilityBin { kReasonable, kHeavyOcclusion, kReasonableHeavy };
/// R: [0.65, inf); HO: [0.20, 0.65); R+HO: [0.20, inf).
bool in_bin(double visibility, VisibilityBin bin);
const char* bin_name(VisibilityBin bin);

struct BoxGt {
  Box box;
  double visibility = 1.0;
};
struct BoxDetection {
  Box box;
  double score = 0;
};
struct BoxImage {
  std::vector<BoxGt> gts;
  std::vector<BoxDetection> dets;
};

/// FPPI reference points 10^-2 ... 10^0, nine log-spaced values.
std::array<double, 9> fppi_references();

/// Log-average miss rate. Out-of-bin gts are ignore regions. nullopt when
/// the bin holds no gt.
std::optional<double> miss_rate(const std::vector<BoxImage>& images, VisibilityBin bin,
                                double iou_threshold = 0.5);

// --- segmentation --------------------------------------------------------

struct MaskInstance {
  Mask mask;
  Category category = Category::kPerson;
};
struct SegImage {
  std::vector<MaskInstance> gts;
  std::vector<MaskInstance> preds;
};

/// Mean over gts of the category of the IoU of their greedily assigned
/// prediction (highest IoU pair first, one-to-one); unmatched gts count 0.
std::optional<double> instance_seg_iou(const std::vector<SegImage>& images, Category category);

}  // namespace occpose::metrics
