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

#include "occpose/metrics/inference.hpp"

#include <algorithm>
#include <cmath>

#include "occpose/core/heatmap.hpp"
#include "occpose/nn/roi.hpp"

namespace occpose::metrics {

Mask box_mask(const Box& box, int height, int width) {
  Mask m = Mask::Zero(height, width);
  const int y0 = std::max(0, static_cast<int>(std::ceil(box.y0 - 0.5)));
  const int y1 = std::min(height, static_cast<int>(std::ceil(box.y1 - 0.5)));
  const int x0 = std::max(0, static_cast<int>(std::ceil(box.x0 - 0.5)));
  const int x1 = std::min(width, static_cast<int>(std::ceil(box.x1 - 0.5)));
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) m(y, x) = 1;
  return m;
}

std::vector<InstancePrediction> predict(nn::Model<float>& model, const Sample& s,
                                        const InferenceOptions& opts) {
  const int h = s.image.height, w = s.image.width;
  const auto pass = model.mtl_forward(s.domain, nn::from_image<float>(s.image));
  auto dets = model.detect(pass, h, w, opts.score_threshold, opts.nms_iou);
  std::stable_sort(dets.begin(), dets.end(),
                   [](const nn::Detection& a, const nn::Detection& b) { return a.score > b.score; });
  if (static_cast<int>(dets.size()) > opts.max_detections) dets.resize(opts.max_detections);

  std::vector<InstancePrediction> out;
  out.reserve(dets.size());
  for (const nn::Detection& d : dets) {
    InstancePrediction p;
    p.detection = d;
    p.mask = nn::predicted_instance_mask(pass.seg_prob, d.category, d.box);
    if (mask_count(p.mask) == 0) {
      p.mask = box_mask(d.box, h, w);
      p.mask_from_box = true;
    }
    if (nn::roi_feasible(d.box, nn::ModelConfig::kFinestStride)) {
      model.begin_instance(pass.pyramid[0], d.box, p.mask_from_box ? nullptr : &p.mask);
      const auto probs = model.pose_heatmaps();
      const auto hm = nn::as_heatmaps(probs, nn::roi_heatmap_frame(d.box, model.config()));
      p.keypoints = decode_heatmaps(hm, opts.keypoint_threshold);
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace occpose::metrics
