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

#include "occpose/losses/losses.hpp"

namespace occpose::losses {

double total_loss(const LossBreakdown& p, const LossWeights& w) {
  const std::pair<const char*, double> parts[] = {
      {"det_c", p.det_c}, {"det_m", p.det_m}, {"seg_c", p.seg_c},
      {"seg_m", p.seg_m}, {"dc", p.dc},       {"pe", p.pe}};
  for (const auto& [name, v] : parts) {
    if (!std::isfinite(v)) throw std::domain_error(std::string("total_loss: non-finite ") + name);
    if (v < 0) throw std::domain_error(std::string("total_loss: negative ") + name);
  }
  return p.det_c + p.det_m + w.alpha * p.seg_c + w.alpha * p.seg_m + w.beta * p.dc +
         w.gamma * p.pe;
}

LossBreakdown with_total(LossBreakdown parts, const LossWeights& w) {
  parts.total = total_loss(parts, w);
  return parts;
}

double seg_loss(const Matrix<double>& pred, const Mask& gt) {
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols()) {
    throw std::invalid_argument("seg_loss: shape mismatch");
  }
  return seg_loss<double>(pred, gt.cast<double>(), nullptr);
}

DetectionTargets detection_targets(const Sample& s, int stride) {
  std::vector<Box> boxes;
  std::vector<Category> cats;
  for (const Instance& inst : s.instances) {
    boxes.push_back(inst.box);
    cats.push_back(inst.category);
  }
  return nn::encode_targets(boxes, cats, s.image.height / stride, s.image.width / stride, stride);
}

}  // namespace occpose::losses
