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

#include <algorithm>
#include <cmath>
#include <vector>

#include "occpose/core/geometry.hpp"
#include "occpose/core/types.hpp"
#include "occpose/nn/tensor.hpp"

namespace occpose::nn {

// Anchor-free centre head on the finest pyramid level. Raw head channels:
//   0      objectness logit
//   1..2   category logits (person, rider)
//   3..6   box encoding (dx, dy, log w/ref, log h/ref)
// A box with centre (cx, cy) and size (w, h) in edge coordinates is encoded at
// cell (r, c) as dx = cx / stride - (c + 0.5), dy = cy / stride - (r + 0.5),
// lw = log(w / kBoxSizeRef), lh = log(h / kBoxSizeRef).
inline constexpr int kDetHeadChannels = 7;
inline constexpr double kBoxSizeRef = 32.0;
/// Cells within this Chebyshev radius of the centre cell are positives.
inline constexpr int kPositiveRadius = 1;

struct Detection {
  Box box;
  double score = 0;
  Category category = Category::kPerson;
};

template <typename Scalar>
struct DetectionHeadOutput {
  int stride = 2;
  FeatureMap<Scalar> objectness;  // 1 x h x w, probabilities
  FeatureMap<Scalar> category;    // 2 x h x w, softmax probabilities
  FeatureMap<Scalar> offsets;     // 4 x h x w, raw regression values
};

template <typename Scalar>
DetectionHeadOutput<Scalar> activate_head(const FeatureMap<Scalar>& raw, int stride) {
  DetectionHeadOutput<Scalar> out;
  out.stride = stride;
  const int h = raw.height, w = raw.width;
  out.objectness = FeatureMap<Scalar>(1, h, w);
  out.category = FeatureMap<Scalar>(kNumCategories, h, w);
  out.offsets = FeatureMap<Scalar>(4, h, w);
  out.objectness.data.row(0) =
      (Scalar(1) + (-raw.data.row(0).array()).exp()).inverse().matrix();
  const auto l0 = raw.data.row(1).array(), l1 = raw.data.row(2).array();
  const auto m = l0.max(l1);
  const auto e0 = (l0 - m).exp(), e1 = (l1 - m).exp();
  out.category.data.row(0) = (e0 / (e0 + e1)).matrix();
  out.category.data.row(1) = (e1 / (e0 + e1)).matrix();
  out.offsets.data = raw.data.middleRows(3, 4);
  return out;
}

struct DetectionTargets {
  int height = 0, width = 0, stride = 2;
  Eigen::Matrix<std::uint8_t, 1, Eigen::Dynamic> positive;   // per cell
  Eigen::Matrix<int, 1, Eigen::Dynamic> category;            // per cell
  Eigen::Matrix<double, 4, Eigen::Dynamic> offsets;          // per cell
  int num_positive = 0;
};

inline std::array<double, 4> encode_box(const Box& b, int r, int c, int stride) {
  const double cx = 0.5 * (b.x0 + b.x1), cy = 0.5 * (b.y0 + b.y1);
  return {cx / stride - (c + 0.5), cy / stride - (r + 0.5),
          std::log(b.width() / kBoxSizeRef), std::log(b.height() / kBoxSizeRef)};
}

inline Box decode_box(const std::array<double, 4>& e, int r, int c, int stride) {
  const double cx = (c + 0.5 + e[0]) * stride, cy = (r + 0.5 + e[1]) * stride;
  const double w = std::exp(e[2]) * kBoxSizeRef, h = std::exp(e[3]) * kBoxSizeRef;
  return {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
}

/// Positive cells lie around each box centre cell; a cell claimed by several
/// boxes goes to the one whose centre is nearest.
DetectionTargets encode_targets(const std::vector<Box>& boxes,
                                const std::vector<Category>& categories, int height,
                                int width, int stride);

std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold);

template <typename Scalar>
std::vector<Detection> decode_detections(const DetectionHeadOutput<Scalar>& out,
                                         int image_height, int image_width,
                                         double score_threshold = 0.3,
                                         double nms_iou = 0.5, int max_detections = 20) {
  std::vector<Detection> dets;
  const int h = out.objectness.height, w = out.objectness.width;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double score = out.objectness.at(0, r, c);
      if (score < score_threshold) continue;
      std::array<double, 4> e;
      for (int k = 0; k < 4; ++k) e[k] = std::clamp<double>(out.offsets.at(k, r, c), -8.0, 8.0);
      Box b = decode_box(e, r, c, out.stride);
      b.x0 = std::clamp(b.x0, 0.0, static_cast<double>(image_width));
      b.x1 = std::clamp(b.x1, 0.0, static_cast<double>(image_width));
      b.y0 = std::clamp(b.y0, 0.0, static_cast<double>(image_height));
      b.y1 = std::clamp(b.y1, 0.0, static_cast<double>(image_height));
      if (!b.valid()) continue;
      const Category cat = out.category.at(1, r, c) > out.category.at(0, r, c)
                               ? Category::kRider
                               : Category::kPerson;
      dets.push_back({b, score, cat});
    }
  }
  dets = nms(std::move(dets), nms_iou);
  if (static_cast<int>(dets.size()) > max_detections) dets.resize(max_detections);
  return dets;
}

}  // namespace occpose::nn
