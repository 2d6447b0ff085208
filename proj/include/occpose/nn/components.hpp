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
#include <string>
#include <vector>

#include "occpose/nn/config.hpp"
#include "occpose/nn/detection.hpp"
#include "occpose/nn/layers.hpp"

namespace occpose::nn {

/// He-init gains of the pose branch: normalised convolutions, output layer.
inline constexpr double kPoseInitGain = 0.01;
inline constexpr double kPoseOutputGain = 1.0;

/// conv -> group norm -> (+ skip) -> relu
template <typename Scalar>
struct ConvBlock {
  Conv2d<Scalar> conv;
  GroupNorm<Scalar> norm;
  Relu<Scalar> relu;
  bool residual = false;
  bool activate = true;

  ConvBlock() = default;
  ConvBlock(Conv2d<Scalar> c, bool skip, bool relu_out = true)
      : conv(std::move(c)), norm(conv.out_channels()), residual(skip), activate(relu_out) {}

  FeatureMap<Scalar> forward(const FeatureMap<Scalar>& x) {
    FeatureMap<Scalar> y = norm.forward(conv.forward(x));
    if (residual) y += x;
    return activate ? relu.forward(y) : y;
  }
  /// Rescales (weight, bias) jointly to the given L2 norm; the block output
  /// is invariant to that scale because of the normalisation.
  void project(double norm) {
    const double n = std::sqrt(static_cast<double>(conv.weight.value.squaredNorm() +
                                                   conv.bias.value.squaredNorm()));
    if (n <= 0) return;
    const auto f = static_cast<Scalar>(norm / n);
    conv.weight.value *= f;
    conv.bias.value *= f;
  }
  double weight_norm() const {
    return std::sqrt(static_cast<double>(conv.weight.value.squaredNorm() + conv.bias.value.squaredNorm()));
  }

  FeatureMap<Scalar> backward(const FeatureMap<Scalar>& dy) {
    const FeatureMap<Scalar> d = activate ? relu.backward(dy) : dy;
    FeatureMap<Scalar> dx = conv.backward(norm.backward(d));
    if (residual) dx += d;
    return dx;
  }

  template <typename Fn>
  void visit(const std::string& prefix, Fn&& fn) {
    conv.visit(prefix, fn);
    norm.visit(prefix + "norm.", fn);
  }
};

/// deconv -> group norm -> relu
template <typename Scalar>
struct DeconvBlock {
  Deconv2x<Scalar> deconv;
  GroupNorm<Scalar> norm;
  Relu<Scalar> relu;

  DeconvBlock() = default;
  DeconvBlock(int in, int out, Rng& rng, double gain = 1.0)
      : deconv(in, out, rng, gain), norm(out) {}

  FeatureMap<Scalar> forward(const FeatureMap<Scalar>& x) {
    return relu.forward(norm.forward(deconv.forward(x)));
  }
  FeatureMap<Scalar> backward(const FeatureMap<Scalar>& dy) {
    return deconv.backward(norm.backward(relu.backward(dy)));
  }

  template <typename Fn>
  void visit(const std::string& prefix, Fn&& fn) {
    deconv.visit(prefix, fn);
    norm.visit(prefix + "norm.", fn);
  }
};

/// Bottom-up conv stack with 1x1 laterals and a nearest-upsampling top-down
/// path. Level l has stride 2^(l+1) and fpn_channels channels.
template <typename Scalar>
class FpnEncoder {
 public:
  FpnEncoder() = default;
  FpnEncoder(const ModelConfig& cfg, Rng& rng) {
    const auto residual = cfg.residual_blocks_per_level();
    levels_.resize(cfg.fpn_levels);
    int in = 3;
    for (int l = 0; l < cfg.fpn_levels; ++l) {
      const int width = cfg.level_width(l);
      levels_[l].emplace_back(Conv2d<Scalar>(in, width, 3, 2, 1, 1, rng), false);
      for (int b = 0; b < residual[l]; ++b) {
        // Residual branches start small so deep stacks stay well scaled.
        levels_[l].emplace_back(
            Conv2d<Scalar>(width, width, 3, 1, 1, cfg.conv_groups(), rng, 0.5), true);
      }
      laterals_.emplace_back(width, cfg.fpn_channels, 1, 1, 0, 1, rng, 0.5);
      in = width;
    }
    ups_.resize(cfg.fpn_levels - 1);
  }

  int levels() const { return static_cast<int>(levels_.size()); }

  std::vector<FeatureMap<Scalar>> forward(const FeatureMap<Scalar>& image) {
    const int n = levels();
    const int multiple = 1 << n;
    if (image.height % multiple != 0 || image.width % multiple != 0) {
      throw std::invalid_argument("fpn_encode: image height and width must be multiples of " +
                                  std::to_string(multiple));
    }
    std::vector<FeatureMap<Scalar>> bottom_up;
    FeatureMap<Scalar> x = image;
    for (auto& level : levels_) {
      for (auto& block : level) x = block.forward(x);
      bottom_up.push_back(x);
    }
    std::vector<FeatureMap<Scalar>> pyramid(n);
    pyramid[n - 1] = laterals_[n - 1].forward(bottom_up[n - 1]);
    for (int l = n - 2; l >= 0; --l) {
      pyramid[l] = laterals_[l].forward(bottom_up[l]);
      pyramid[l] += ups_[l].forward(pyramid[l + 1]);
    }
    shapes_.clear();
    for (const auto& p : pyramid) shapes_.push_back({p.channels, p.height, p.width});
    return pyramid;
  }

  /// `d_pyramid[l]` may be empty (0 channels) when level l received no
  /// gradient. Returns the gradient with respect to the image.
  FeatureMap<Scalar> backward(const std::vector<FeatureMap<Scalar>>& d_pyramid) {
    const int n = levels();
    std::vector<FeatureMap<Scalar>> d(n);
    for (int l = 0; l < n; ++l) {
      d[l] = d_pyramid[l].channels != 0
                 ? d_pyramid[l]
                 : FeatureMap<Scalar>(shapes_[l][0], shapes_[l][1], shapes_[l][2]);
      if (l > 0) d[l] += ups_[l - 1].backward(d[l - 1]);
    }
    FeatureMap<Scalar> g;
    for (int l = n - 1; l >= 0; --l) {
      const FeatureMap<Scalar> lateral = laterals_[l].backward(d[l]);
      if (l == n - 1) {
        g = lateral;
      } else {
        g += lateral;
      }
      for (auto it = levels_[l].rbegin(); it != levels_[l].rend(); ++it) g = it->backward(g);
    }
    return g;
  }

  template <typename Fn>
  void visit(Fn&& fn) {
    for (std::size_t l = 0; l < levels_.size(); ++l) {
      for (std::size_t b = 0; b < levels_[l].size(); ++b) {
        levels_[l][b].visit("level" + std::to_string(l) + ".block" + std::to_string(b) + ".", fn);
      }
      laterals_[l].visit("lateral" + std::to_string(l) + ".", fn);
    }
  }

  std::vector<Conv2d<Scalar>>& laterals() { return laterals_; }

 private:
  std::vector<std::vector<ConvBlock<Scalar>>> levels_;
  std::vector<Conv2d<Scalar>> laterals_;
  std::vector<Upsample2x<Scalar>> ups_;
  std::vector<std::array<int, 3>> shapes_;
};

/// Centre/size head on the finest (attended) pyramid level.
template <typename Scalar>
class DetectionHead {
 public:
  DetectionHead() = default;
  DetectionHead(const ModelConfig& cfg, Rng& rng)
      : hidden_(Conv2d<Scalar>(cfg.fpn_channels, cfg.fpn_channels, 3, 1, 1, 1, rng), false),
        out_(cfg.fpn_channels, kDetHeadChannels, 1, 1, 0, 1, rng, 0.1) {
    // Objectness prior of 1% keeps the focal term stable at the start.
    out_.bias.value(0, 0) = static_cast<Scalar>(-4.6);
  }

  FeatureMap<Scalar> forward(const FeatureMap<Scalar>& p0) {
    return out_.forward(hidden_.forward(p0));
  }
  FeatureMap<Scalar> backward(const FeatureMap<Scalar>& d_raw) {
    return hidden_.backward(out_.backward(d_raw));
  }

  template <typename Fn>
  void visit(Fn&& fn) {
    hidden_.visit("hidden.", fn);
    out_.visit("out.", fn);
  }

  Conv2d<Scalar>& output_layer() { return out_; }

 private:
  ConvBlock<Scalar> hidden_;
  Conv2d<Scalar> out_;
};

/// Deconvolution path from the coarsest level back to image resolution, with
/// skip additions from each finer level. Emits per-category logits.
template <typename Scalar>
class SegmentationHead {
 public:
  SegmentationHead() = default;
  SegmentationHead(const ModelConfig& cfg, Rng& rng) {
    const int c = cfg.fpn_channels;
    for (int l = 0; l < cfg.fpn_levels; ++l) {
      const int out = l + 1 == cfg.fpn_levels ? c / 2 : c;
      deconvs_.emplace_back(c, out, rng);
    }
    out_ = Conv2d<Scalar>(c / 2, kNumCategories, 1, 1, 0, 1, rng, 0.5);
  }

  /// Logits of shape kNumCategories x H x W.
  FeatureMap<Scalar> forward(const std::vector<FeatureMap<Scalar>>& pyramid) {
    const int n = static_cast<int>(pyramid.size());
    FeatureMap<Scalar> x = pyramid[n - 1];
    for (int s = 0; s < n; ++s) {
      x = deconvs_[s].forward(x);
      const int skip = n - 2 - s;
      if (skip >= 0) x += pyramid[skip];
    }
    return out_.forward(x);
  }

  std::vector<FeatureMap<Scalar>> backward(const FeatureMap<Scalar>& d_logits) {
    const int n = static_cast<int>(deconvs_.size());
    std::vector<FeatureMap<Scalar>> d_pyramid(n);
    FeatureMap<Scalar> g = out_.backward(d_logits);
    for (int s = n - 1; s >= 0; --s) {
      const int skip = n - 2 - s;
      if (skip >= 0) d_pyramid[skip] = g;
      g = deconvs_[s].backward(g);
    }
    d_pyramid[n - 1] = g;
    return d_pyramid;
  }

  template <typename Fn>
  void visit(Fn&& fn) {
    for (std::size_t s = 0; s < deconvs_.size(); ++s) {
      deconvs_[s].visit("deconv" + std::to_string(s) + ".", fn);
    }
    out_.visit("out.", fn);
  }

 private:
  std::vector<DeconvBlock<Scalar>> deconvs_;
  Conv2d<Scalar> out_;
};

/// Plain conv stack over an ROI feature.
template <typename Scalar>
class PoseEncoder {
 public:
  PoseEncoder() = default;
  PoseEncoder(const ModelConfig& cfg, Rng& rng) {
    const int c = cfg.pose_channels;
    const double g = kPoseInitGain;
    blocks_.emplace_back(Conv2d<Scalar>(cfg.fpn_channels, c, 3, 1, 1, 1, rng, g), false);
    blocks_.emplace_back(Conv2d<Scalar>(c, c, 3, 1, 1, 1, rng, g), true);
    // Linear output: the embedding is shared by the decoder and the classifier.
    blocks_.emplace_back(Conv2d<Scalar>(c, c, 3, 1, 1, 1, rng, g), true, false);
    for (const auto& b : blocks_) norms_.push_back(b.weight_norm());
  }

  /// Restores every convolution to its initial norm.
  void project() {
    for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].project(norms_[i]);
  }

  FeatureMap<Scalar> forward(const FeatureMap<Scalar>& x) {
    FeatureMap<Scalar> y = x;
    for (auto& b : blocks_) y = b.forward(y);
    return y;
  }
  FeatureMap<Scalar> backward(const FeatureMap<Scalar>& dy) {
    FeatureMap<Scalar> g = dy;
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) g = it->backward(g);
    return g;
  }

  template <typename Fn>
  void visit(Fn&& fn) {
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      blocks_[i].visit("block" + std::to_string(i) + ".", fn);
    }
  }

 private:
  std::vector<ConvBlock<Scalar>> blocks_;
  std::vector<double> norms_;
};

/// Upsamples the pose encoding and emits one heatmap logit per keypoint.
template <typename Scalar>
class PoseDecoder {
 public:
  PoseDecoder() = default;
  PoseDecoder(const ModelConfig& cfg, Rng& rng) {
    for (int s = cfg.heatmap_stride; s > 1; s /= 2) {
      deconvs_.emplace_back(cfg.pose_channels, cfg.pose_channels, rng, kPoseInitGain);
    }
    out_ = Conv2d<Scalar>(cfg.pose_channels, kNumKeypoints, 3, 1, 1, 1, rng, kPoseOutputGain);
    out_.bias.value.setConstant(static_cast<Scalar>(-3.0));
  }

  FeatureMap<Scalar> forward(const FeatureMap<Scalar>& x) {
    FeatureMap<Scalar> y = x;
    for (auto& d : deconvs_) y = d.forward(y);
    return out_.forward(y);
  }
  FeatureMap<Scalar> backward(const FeatureMap<Scalar>& d_logits) {
    FeatureMap<Scalar> g = out_.backward(d_logits);
    for (int s = static_cast<int>(deconvs_.size()) - 1; s >= 0; --s) {
      g = deconvs_[s].backward(g);
    }
    return g;
  }

  template <typename Fn>
  void visit(Fn&& fn) {
    for (std::size_t s = 0; s < deconvs_.size(); ++s) {
      deconvs_[s].visit("deconv" + std::to_string(s) + ".", fn);
    }
    out_.visit("out.", fn);
  }

 private:
  std::vector<DeconvBlock<Scalar>> deconvs_;
  Conv2d<Scalar> out_;
};

/// Two-layer MLP on the pooled pose embedding; emits the source-domain logit.
template <typename Scalar>
class DomainClassifier {
 public:
  DomainClassifier() = default;
  DomainClassifier(const ModelConfig& cfg, Rng& rng)
      : norm_(cfg.pose_channels, 1),
        hidden_(cfg.pose_channels, cfg.pose_channels / 2, 1, 1, 0, 1, rng),
        relu_(Scalar(0.2)),
        out_(cfg.pose_channels / 2, 1, 1, 1, 0, 1, rng) {
    out_.weight.value.setZero();
  }

  FeatureMap<Scalar> forward(const FeatureMap<Scalar>& embedding) {
    return out_.forward(relu_.forward(hidden_.forward(norm_.forward(embedding))));
  }
  FeatureMap<Scalar> backward(const FeatureMap<Scalar>& d_logit) {
    return norm_.backward(hidden_.backward(relu_.backward(out_.backward(d_logit))));
  }

  template <typename Fn>
  void visit(Fn&& fn) {
    norm_.visit("norm.", fn);
    hidden_.visit("hidden.", fn);
    out_.visit("out.", fn);
  }

 private:
  GroupNorm<Scalar> norm_;
  Conv2d<Scalar> hidden_;
  Relu<Scalar> relu_;
  Conv2d<Scalar> out_;
};

}  // namespace occpose::nn
