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
#include <stdexcept>
#include <string>
#include <vector>

#include "occpose/core/types.hpp"
#include "occpose/nn/detection.hpp"
#include "occpose/nn/tensor.hpp"

namespace occpose::losses {

using nn::DetectionHeadOutput;
using nn::DetectionTargets;
using nn::FeatureMap;
using nn::Matrix;

inline constexpr double kProbEps = 1e-7;
inline constexpr double kFocalGamma = 2.0;
inline constexpr double kFocalAlpha = 0.25;

struct LossWeights {
  double alpha = 0.5;  // segmentation
  double beta = 1.0;   // domain classification
  double gamma = 1.0;  // pose
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct LossBreakdown {
  double det_c = 0, det_m = 0, seg_c = 0, seg_m = 0, dc = 0, pe = 0;
  double total = 0;
};

/// det_c + det_m + alpha (seg_c + seg_m) + beta dc + gamma pe. Throws
/// std::domain_error naming the first non-finite or negative part.
double total_loss(const LossBreakdown& parts, const LossWeights& w);

/// Same, and stores the result in parts.total.
LossBreakdown with_total(LossBreakdown parts, const LossWeights& w);

template <typename Scalar>
Scalar clip_prob(Scalar p) {
  return std::clamp(p, static_cast<Scalar>(kProbEps), static_cast<Scalar>(1 - kProbEps));
}

/// Binary cross-entropy of probability p against target t, with its
/// derivative in p (zero where clipping is active).
template <typename Scalar>
Scalar bce(Scalar p, Scalar t, Scalar* dp) {
  const Scalar q = clip_prob(p);
  if (dp) *dp = (q == p) ? (-t / q + (1 - t) / (1 - q)) : Scalar(0);
  return -(t * std::log(q) + (1 - t) * std::log(1 - q));
}

/// Mean BCE over all elements. `grad`, when given, receives d/dpred.
template <typename Scalar>
Scalar seg_loss(const Matrix<Scalar>& pred, const Matrix<Scalar>& target, Matrix<Scalar>* grad) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw std::invalid_argument("seg_loss: shape mismatch");
  }
  const Eigen::Index n = pred.size();
  if (grad) grad->resize(pred.rows(), pred.cols());
  double sum = 0;
  const Scalar inv = Scalar(1) / static_cast<Scalar>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Scalar d;
    sum += bce(pred.data()[i], target.data()[i], grad ? &d : nullptr);
    if (grad) grad->data()[i] = d * inv;
  }
  return static_cast<Scalar>(sum / n);
}

/// Gradient of the mean BCE with respect to the logits that produced `pred`
/// through a sigmoid: (pred - target) / n.
template <typename Scalar>
Matrix<Scalar> seg_logit_grad(const Matrix<Scalar>& pred, const Matrix<Scalar>& target) {
  return (pred - target) / static_cast<Scalar>(pred.size());
}

/// Binary raster overload.
double seg_loss(const Matrix<double>& pred, const Mask& gt);

/// Per-category union of instance masks, kNumCategories x (H*W).
template <typename Scalar>
Matrix<Scalar> segmentation_targets(const Sample& s) {
  const int h = s.image.height, w = s.image.width;
  Matrix<Scalar> t = Matrix<Scalar>::Zero(kNumCategories, static_cast<Eigen::Index>(h) * w);
  for (const Instance& inst : s.instances) {
    const int c = static_cast<int>(inst.category);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (inst.mask(y, x)) t(c, y * w + x) = 1;
  }
  return t;
}

struct DetLoss {
  double focal = 0, box = 0, cls = 0;
  double total = 0;
  bool no_positive = false;
};

DetectionTargets detection_targets(const Sample& s, int stride);

/// Focal objectness term over every cell plus smooth-L1 box and categorical
/// cross-entropy terms over positive cells, all divided by max(1, positives).
/// `grad_raw`, when given, receives the gradient with respect to the raw head
/// channels (objectness and category logits, box encodings).
template <typename Scalar>
DetLoss det_loss(const DetectionHeadOutput<Scalar>& out, const DetectionTargets& t,
                 FeatureMap<Scalar>* grad_raw) {
  const int h = out.objectness.height, w = out.objectness.width;
  if (h != t.height || w != t.width) throw std::invalid_argument("det_loss: shape mismatch");
  if (grad_raw) *grad_raw = FeatureMap<Scalar>(nn::kDetHeadChannels, h, w);
  DetLoss loss;
  loss.no_positive = t.num_positive == 0;
  const double norm = std::max(1, t.num_positive);
  const double a = kFocalAlpha, g = kFocalGamma;
  double focal = 0, box = 0, cls = 0;
  for (int i = 0; i < h * w; ++i) {
    const double p = clip_prob<double>(out.objectness.data(0, i));
    double f, dz;
    if (t.positive(i)) {
      f = -a * std::pow(1 - p, g) * std::log(p);
      dz = a * std::pow(1 - p, g) * (g * p * std::log(p) - (1 - p));
    } else {
      f = -(1 - a) * std::pow(p, g) * std::log(1 - p);
      dz = -(1 - a) * std::pow(p, g) * (g * (1 - p) * std::log(1 - p) - p);
    }
    focal += f;
    if (grad_raw) grad_raw->data(0, i) = static_cast<Scalar>(dz / norm);
    if (!t.positive(i)) continue;
    for (int k = 0; k < 4; ++k) {
      const double r = out.offsets.data(k, i) - t.offsets(k, i);
      const double ar = std::abs(r);
      box += ar < 1 ? 0.5 * r * r : ar - 0.5;
      if (grad_raw) grad_raw->data(3 + k, i) = static_cast<Scalar>((ar < 1 ? r : (r > 0 ? 1 : -1)) / norm);
    }
    const int c = t.category(i);
    cls += -std::log(clip_prob<double>(out.category.data(c, i)));
    if (grad_raw) {
      for (int k = 0; k < kNumCategories; ++k) {
        const double q = out.category.data(k, i);
        grad_raw->data(1 + k, i) = static_cast<Scalar>((q - (k == c ? 1.0 : 0.0)) / norm);
      }
    }
  }
  loss.focal = focal / norm;
  loss.box = box / norm;
  loss.cls = cls / norm;
  loss.total = loss.focal + loss.box + loss.cls;
  return loss;
}

struct PoseLoss {
  double value = 0;
  int included_channels = 0;
  bool no_labeled = false;
};

/// Mean squared error over the channels whose keypoint is labeled (visible or
/// not) and all their pixels. pred and target are kNumKeypoints x pixels.
template <typename Scalar>
PoseLoss pose_loss(const Matrix<Scalar>& pred, const Matrix<Scalar>& target,
                   const Keypoints& keypoints, Matrix<Scalar>* grad) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols() || pred.rows() != kNumKeypoints) {
    throw std::invalid_argument("pose_loss: shape mismatch");
  }
  PoseLoss loss;
  if (grad) *grad = Matrix<Scalar>::Zero(pred.rows(), pred.cols());
  for (int k = 0; k < kNumKeypoints; ++k) loss.included_channels += keypoints[k].labeled() ? 1 : 0;
  if (loss.included_channels == 0) {
    loss.no_labeled = true;
    return loss;
  }
  const double n = static_cast<double>(loss.included_channels) * pred.cols();
  double sum = 0;
  for (int k = 0; k < kNumKeypoints; ++k) {
    if (!keypoints[k].labeled()) continue;
    const auto diff = (pred.row(k) - target.row(k)).template cast<double>();
    sum += diff.squaredNorm();
    if (grad) grad->row(k) = (2.0 / n * diff).template cast<Scalar>();
  }
  loss.value = sum / n;
  return loss;
}

/// BCE of the source-domain probability with label 1 for source samples.
template <typename Scalar>
Scalar domain_loss(Scalar p_source, Domain domain, Scalar* dp) {
  const Scalar label = domain == Domain::kSource ? Scalar(1) : Scalar(0);
  return bce(p_source, label, dp);
}

/// Gradient of domain_loss with respect to the classifier logit.
template <typename Scalar>
Scalar domain_logit_grad(Scalar p_source, Domain domain) {
  return p_source - (domain == Domain::kSource ? Scalar(1) : Scalar(0));
}

}  // namespace occpose::losses
