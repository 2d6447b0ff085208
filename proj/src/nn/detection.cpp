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

#include "occpose/nn/detection.hpp"

#include <limits>

namespace occpose::nn {

DetectionTargets encode_targets(const std::vector<Box>& boxes,
                                const std::vector<Category>& categories, int height,
                                int width, int stride) {
  DetectionTargets t;
  t.height = height;
  t.width = width;
  t.stride = stride;
  const Eigen::Index n = static_cast<Eigen::Index>(height) * width;
  t.positive.setZero(n);
  t.category.setZero(n);
  t.offsets.setZero(4, n);
  std::vector<double> claim(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const Box& b = boxes[i];
    const double cx = 0.5 * (b.x0 + b.x1) / stride, cy = 0.5 * (b.y0 + b.y1) / stride;
    const int cc = std::clamp(static_cast<int>(std::floor(cx)), 0, width - 1);
    const int cr = std::clamp(static_cast<int>(std::floor(cy)), 0, height - 1);
    for (int r = cr - kPositiveRadius; r <= cr + kPositiveRadius; ++r) {
      for (int c = cc - kPositiveRadius; c <= cc + kPositiveRadius; ++c) {
        if (r < 0 || r >= height || c < 0 || c >= width) continue;
        const double d = std::hypot(c + 0.5 - cx, r + 0.5 - cy);
        const Eigen::Index idx = static_cast<Eigen::Index>(r) * width + c;
        if (d >= claim[idx]) continue;
        claim[idx] = d;
        t.positive(idx) = 1;
        t.category(idx) = static_cast<int>(categories[i]);
        const auto e = encode_box(b, r, c, stride);
        for (int k = 0; k < 4; ++k) t.offsets(k, idx) = e[k];
      }
    }
  }
  t.num_positive = static_cast<int>(t.positive.cast<int>().sum());
  return t;
}

std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold) {
  std::stable_sort(dets.begin(), dets.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
  std::vector<Detection> kept;
  for (const Detection& d : dets) {
    bool suppressed = false;
    for (const Detection& k : kept) {
      if (box_iou(d.box, k.box) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

}  // namespace occpose::nn
