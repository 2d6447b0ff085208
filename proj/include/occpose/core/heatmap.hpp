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

#include <cmath>
#include <stdexcept>

#include <Eigen/Core>

#include "occpose/core/types.hpp"

namespace occpose {

/// Affine map between keypoint pixel coordinates and heatmap cells.
/// Cell (c, r) has its centre at edge coordinate
/// (origin_x + (c + 0.5) * stride_x, origin_y + (r + 0.5) * stride_y).
struct HeatmapFrame {
  double origin_x = 0, origin_y = 0;
  double stride_x = 1, stride_y = 1;

  static HeatmapFrame image(int stride) {
    return {0.0, 0.0, static_cast<double>(stride),
            static_cast<double>(stride)};
  }
  /// Frame spanning `box` with `cols` x `rows` cells.
  static HeatmapFrame roi(const Box& box, int rows, int cols) {
    return {box.x0, box.y0, box.width() / cols, box.height() / rows};
  }

  double to_cell_x(double x) const {
    return (x + 0.5 - origin_x) / stride_x - 0.5;
  }
  double to_cell_y(double y) const {
    return (y + 0.5 - origin_y) / stride_y - 0.5;
  }
  double to_pixel_x(double c) const {
    return origin_x + (c + 0.5) * stride_x - 0.5;
  }
  double to_pixel_y(double r) const {
    return origin_y + (r + 0.5) * stride_y - 0.5;
  }
};

/// kNumKeypoints channels of h x w cells, one channel per row of `data`.
template <typename Scalar = float>
struct Heatmaps {
  using Storage =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  int height = 0, width = 0;
  HeatmapFrame frame;
  Storage data;

  Heatmaps() = default;
  Heatmaps(int h, int w, HeatmapFrame f)
      : height(h), width(w), frame(f),
        data(Storage::Zero(kNumKeypoints, static_cast<Eigen::Index>(h) * w)) {}

  Scalar& at(int k, int r, int c) { return data(k, r * width + c); }
  Scalar at(int k, int r, int c) const { return data(k, r * width + c); }
};

/// Unnormalised Gaussians (peak 1) of scale `sigma` cells at each labeled
/// keypoint; channels of not-labeled keypoints stay zero.
template <typename Scalar = float>
Heatmaps<Scalar> render_heatmaps(const Keypoints& keypoints, int height,
                                 int width, HeatmapFrame frame, double sigma) {
  if (!(sigma > 0)) throw std::invalid_argument("render_heatmaps: sigma <= 0");
  Heatmaps<Scalar> out(height, width, frame);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int k = 0; k < kNumKeypoints; ++k) {
    const Keypoint& kp = keypoints[k];
    if (!kp.labeled()) continue;
    const double cx = frame.to_cell_x(kp.x);
    const double cy = frame.to_cell_y(kp.y);
    for (int r = 0; r < height; ++r) {
      const double dy = r - cy;
      for (int c = 0; c < width; ++c) {
        const double dx = c - cx;
        out.at(k, r, c) = static_cast<Scalar>(std::exp(-(dx * dx + dy * dy) * inv));
      }
    }
  }
  return out;
}

template <typename Scalar = float>
Heatmaps<Scalar> render_heatmaps(const Keypoints& keypoints, int height,
                                 int width, int stride, double sigma) {
  return render_heatmaps<Scalar>(keypoints, height, width,
                                 HeatmapFrame::image(stride), sigma);
}

/// Per-channel argmax mapped back to pixel coordinates. The first maximum in
/// row-major order wins; channels whose peak is below `threshold` keep the
/// argmax location but are marked not-labeled.
template <typename Scalar>
Keypoints decode_heatmaps(const Heatmaps<Scalar>& h, double threshold) {
  if (!(threshold > 0 && threshold < 1)) {
    throw std::invalid_argument("decode_heatmaps: threshold not in (0,1)");
  }
  Keypoints out{};
  for (int k = 0; k < kNumKeypoints; ++k) {
    Eigen::Index best = 0;
    Scalar best_value = h.data(k, 0);
    for (Eigen::Index i = 1; i < h.data.cols(); ++i) {
      if (h.data(k, i) > best_value) {
        best_value = h.data(k, i);
        best = i;
      }
    }
    const int r = static_cast<int>(best / h.width);
    const int c = static_cast<int>(best % h.width);
    out[k].x = h.frame.to_pixel_x(c);
    out[k].y = h.frame.to_pixel_y(r);
    out[k].visibility = best_value >= threshold ? Visibility::kLabeledVisible
                                                : Visibility::kNotLabeled;
  }
  return out;
}

/// Peak value of each channel, used as a per-keypoint confidence.
template <typename Scalar>
std::array<double, kNumKeypoints> heatmap_peaks(const Heatmaps<Scalar>& h) {
  std::array<double, kNumKeypoints> out{};
  for (int k = 0; k < kNumKeypoints; ++k) out[k] = h.data.row(k).maxCoeff();
  return out;
}

}  // namespace occpose
