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
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "occpose/core/types.hpp"
#include "occpose/nn/tensor.hpp"

namespace occpose::nn {

struct InstanceProvenance {
  std::string sample_id;
  int instance_index = -1;
  Domain domain = Domain::kSource;
};

template <typename Scalar>
struct InstanceFeature {
  FeatureMap<Scalar> features;
  InstanceProvenance provenance;
};

/// Area-average of `mask` over each of the roi x roi cells spanning `box`,
/// binarised at `threshold`.
inline Mask downsample_mask(const Mask& mask, const Box& box, int roi,
                            double threshold = 0.5) {
  Mask out = Mask::Zero(roi, roi);
  const double cw = box.width() / roi, ch = box.height() / roi;
  for (int i = 0; i < roi; ++i) {
    const double y0 = box.y0 + i * ch, y1 = y0 + ch;
    for (int j = 0; j < roi; ++j) {
      const double x0 = box.x0 + j * cw, x1 = x0 + cw;
      double covered = 0;
      const int r0 = std::max(0, static_cast<int>(std::floor(y0)));
      const int r1 = std::min(static_cast<int>(mask.rows()), static_cast<int>(std::ceil(y1)));
      const int c0 = std::max(0, static_cast<int>(std::floor(x0)));
      const int c1 = std::min(static_cast<int>(mask.cols()), static_cast<int>(std::ceil(x1)));
      for (int r = r0; r < r1; ++r) {
        const double oy = std::min<double>(y1, r + 1) - std::max<double>(y0, r);
        if (oy <= 0) continue;
        for (int c = c0; c < c1; ++c) {
          if (!mask(r, c)) continue;
          const double ox = std::min<double>(x1, c + 1) - std::max<double>(x0, c);
          if (ox > 0) covered += ox * oy;
        }
      }
      out(i, j) = covered / (cw * ch) >= threshold ? 1 : 0;
    }
  }
  return out;
}

/// True when `box` spans at least two feature cells on each side.
inline bool roi_feasible(const Box& box, int feature_stride) {
  return box.valid() && box.width() / feature_stride >= 2.0 &&
         box.height() / feature_stride >= 2.0;
}

/// Bilinear ROI-align with one sample at each output cell centre, followed by
/// multiplication with the binarised, downsampled instance mask.
template <typename Scalar>
class RoiAlign {
 public:
  FeatureMap<Scalar> forward(const FeatureMap<Scalar>& feat, const Box& box,
                             int feature_stride, int roi, const Mask* mask) {
    if (!roi_feasible(box, feature_stride)) {
      throw std::invalid_argument("roi_extract_masked: box narrower than 2 feature cells");
    }
    in_c_ = feat.channels;
    in_h_ = feat.height;
    in_w_ = feat.width;
    roi_ = roi;
    taps_.assign(static_cast<std::size_t>(roi) * roi, {});
    const Mask keep = mask ? downsample_mask(*mask, box, roi) : Mask::Ones(roi, roi);
    const double cw = box.width() / roi, ch = box.height() / roi;
    for (int i = 0; i < roi; ++i) {
      for (int j = 0; j < roi; ++j) {
        Cell& cell = taps_[static_cast<std::size_t>(i) * roi + j];
        if (!keep(i, j)) continue;
        const double ex = box.x0 + (j + 0.5) * cw;
        const double ey = box.y0 + (i + 0.5) * ch;
        const double fx = std::clamp(ex / feature_stride - 0.5, 0.0, in_w_ - 1.0);
        const double fy = std::clamp(ey / feature_stride - 0.5, 0.0, in_h_ - 1.0);
        const int x0 = static_cast<int>(std::floor(fx)), y0 = static_cast<int>(std::floor(fy));
        const int x1 = std::min(x0 + 1, in_w_ - 1), y1 = std::min(y0 + 1, in_h_ - 1);
        const double lx = fx - x0, ly = fy - y0;
        cell.index = {y0 * in_w_ + x0, y0 * in_w_ + x1, y1 * in_w_ + x0, y1 * in_w_ + x1};
        cell.weight = {static_cast<Scalar>((1 - ly) * (1 - lx)), static_cast<Scalar>((1 - ly) * lx),
                       static_cast<Scalar>(ly * (1 - lx)), static_cast<Scalar>(ly * lx)};
        cell.active = true;
      }
    }
    FeatureMap<Scalar> out(in_c_, roi, roi);
    for (std::size_t p = 0; p < taps_.size(); ++p) {
      const Cell& cell = taps_[p];
      if (!cell.active) continue;
      for (int t = 0; t < 4; ++t) {
        out.data.col(static_cast<Eigen::Index>(p)) += cell.weight[t] * feat.data.col(cell.index[t]);
      }
    }
    return out;
  }

  /// Gradient with respect to the full input feature map.
  FeatureMap<Scalar> backward(const FeatureMap<Scalar>& dy) const {
    FeatureMap<Scalar> dx(in_c_, in_h_, in_w_);
    for (std::size_t p = 0; p < taps_.size(); ++p) {
      const Cell& cell = taps_[p];
      if (!cell.active) continue;
      for (int t = 0; t < 4; ++t) {
        dx.data.col(cell.index[t]) += cell.weight[t] * dy.data.col(static_cast<Eigen::Index>(p));
      }
    }
    return dx;
  }

 private:
  struct Cell {
    std::array<Eigen::Index, 4> index{};
    std::array<Scalar, 4> weight{};
    bool active = false;
  };
  int in_c_ = 0, in_h_ = 0, in_w_ = 0, roi_ = 0;
  std::vector<Cell> taps_;
};

/// Pixels of the thresholded segmentation map for `category` whose centres
/// fall inside `box`.
template <typename Scalar>
Mask predicted_instance_mask(const FeatureMap<Scalar>& seg_prob, Category category, const Box& box,
                             double threshold = 0.5) {
  const int h = seg_prob.height, w = seg_prob.width;
  Mask m = Mask::Zero(h, w);
  const int c = static_cast<int>(category);
  const int y0 = std::max(0, static_cast<int>(std::ceil(box.y0 - 0.5)));
  const int y1 = std::min(h, static_cast<int>(std::ceil(box.y1 - 0.5)));
  const int x0 = std::max(0, static_cast<int>(std::ceil(box.x0 - 0.5)));
  const int x1 = std::min(w, static_cast<int>(std::ceil(box.x1 - 0.5)));
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x)
      if (seg_prob.at(c, y, x) >= threshold) m(y, x) = 1;
  return m;
}

/// Forward-only convenience wrapper.
template <typename Scalar>
InstanceFeature<Scalar> roi_extract_masked(const FeatureMap<Scalar>& pyramid_level,
                                           const Box& box, const Mask& mask,
                                           int feature_stride, int roi,
                                           InstanceProvenance provenance = {}) {
  RoiAlign<Scalar> align;
  return {align.forward(pyramid_level, box, feature_stride, roi, &mask),
          std::move(provenance)};
}

}  // namespace occpose::nn
