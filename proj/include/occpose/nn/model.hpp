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

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "occpose/core/hash.hpp"
#include "occpose/core/heatmap.hpp"
#include "occpose/nn/components.hpp"
#include "occpose/nn/detection.hpp"
#include "occpose/nn/roi.hpp"

namespace occpose::nn {

/// Outputs of one pass through a distribution-specific MTL network.
template <typename Scalar>
struct MtlPass {
  Domain domain = Domain::kSource;
  std::vector<FeatureMap<Scalar>> pyramid;   // encoder output
  FeatureMap<Scalar> det_raw;                // kDetHeadChannels x H/2 x W/2
  DetectionHeadOutput<Scalar> det;           // activated head
  FeatureMap<Scalar> seg_logits;             // kNumCategories x H x W
  FeatureMap<Scalar> seg_prob;
};

/// All nine sub-networks. Every parameter belongs to exactly one named
/// component; `visit_params` enumerates them as (component, name, Param).
template <typename Scalar>
class Model {
 public:
  Model() = default;
  explicit Model(const ModelConfig& cfg) : config_(cfg) {
    cfg.validate();
    auto stream = [&](std::uint64_t tag) { return Rng(derive_seed(cfg.init_seed, tag)); };
    Rng r0 = stream(0), r2 = stream(2), r3 = stream(3), r4 = stream(4),
        r5 = stream(5), r6 = stream(6), r7 = stream(7), r8 = stream(8);
    // Both encoders start from the same weights, as from a shared pretrained backbone.
    Rng r0_copy = r0;
    enc_c_ = FpnEncoder<Scalar>(cfg, r0);
    enc_m_ = FpnEncoder<Scalar>(cfg, r0_copy);
    det_c_ = DetectionHead<Scalar>(cfg, r2);
    det_m_ = DetectionHead<Scalar>(cfg, r3);
    seg_c_ = SegmentationHead<Scalar>(cfg, r4);
    seg_m_ = SegmentationHead<Scalar>(cfg, r5);
    pose_enc_ = PoseEncoder<Scalar>(cfg, r6);
    pose_dec_ = PoseDecoder<Scalar>(cfg, r7);
    dom_cls_ = DomainClassifier<Scalar>(cfg, r8);
    attn_c_.resize(cfg.fpn_levels);
    attn_m_.resize(cfg.fpn_levels);
    grl_.set_lambda(cfg.grl_lambda);
  }

  const ModelConfig& config() const { return config_; }

  FpnEncoder<Scalar>& encoder(Domain d) { return d == Domain::kSource ? enc_m_ : enc_c_; }
  DetectionHead<Scalar>& detector(Domain d) { return d == Domain::kSource ? det_m_ : det_c_; }
  SegmentationHead<Scalar>& segmenter(Domain d) { return d == Domain::kSource ? seg_m_ : seg_c_; }
  PoseEncoder<Scalar>& pose_encoder() { return pose_enc_; }
  PoseDecoder<Scalar>& pose_decoder() { return pose_dec_; }
  DomainClassifier<Scalar>& domain_classifier() { return dom_cls_; }
  GradReverse<Scalar>& grad_reverse() { return grl_; }

  template <typename Fn>
  void visit_params(Fn&& fn) {
    auto tag = [&fn](std::string_view component) {
      return [&fn, component](const std::string& name, Param<Scalar>& p) { fn(component, name, p); };
    };
    enc_c_.visit(tag("enc_c"));
    enc_m_.visit(tag("enc_m"));
    det_c_.visit(tag("det_c"));
    det_m_.visit(tag("det_m"));
    seg_c_.visit(tag("seg_c"));
    seg_m_.visit(tag("seg_m"));
    pose_enc_.visit(tag("pose_enc"));
    pose_dec_.visit(tag("pose_dec"));
    dom_cls_.visit(tag("dom_cls"));
  }

  template <typename Fn>
  void visit_params(Fn&& fn) const {
    const_cast<Model*>(this)->visit_params(std::forward<Fn>(fn));
  }

  void zero_grad() {
    visit_params([](std::string_view, const std::string&, Param<Scalar>& p) { p.zero_grad(); });
  }

  std::int64_t parameter_count() const {
    std::int64_t n = 0;
    visit_params([&](std::string_view, const std::string&, Param<Scalar>& p) { n += p.value.size(); });
    return n;
  }

  /// FNV-1a over the raw parameter bytes of the selected components (all
  /// when `components` is empty), in visiting order.
  std::uint64_t parameter_hash(const std::set<std::string>& components = {}) const {
    Fnv1a h;
    visit_params([&](std::string_view component, const std::string& name, Param<Scalar>& p) {
      if (!components.empty() && !components.count(std::string(component))) return;
      h.update(component);
      h.update(name);
      h.update(p.value.data(), static_cast<std::size_t>(p.value.size()) * sizeof(Scalar));
    });
    return h.digest();
  }

  std::uint64_t component_hash(std::string_view component) const {
    return parameter_hash({std::string(component)});
  }

  // --- MTL networks ------------------------------------------------------

  MtlPass<Scalar> mtl_forward(Domain d, const FeatureMap<Scalar>& image) {
    MtlPass<Scalar> pass;
    pass.domain = d;
    pass.pyramid = encoder(d).forward(image);
    auto& attn = attention(d);
    std::vector<FeatureMap<Scalar>> attended(pass.pyramid.size());
    for (std::size_t l = 0; l < pass.pyramid.size(); ++l) attended[l] = attn[l].forward(pass.pyramid[l]);
    pass.det_raw = detector(d).forward(attended[0]);
    pass.det = activate_head(pass.det_raw, ModelConfig::kFinestStride);
    pass.seg_logits = segmenter(d).forward(attended);
    pass.seg_prob = seg_sigmoid_.forward(pass.seg_logits);
    return pass;
  }

  /// Backpropagates gradients on the raw detection channels and the
  /// segmentation logits (either may be empty) plus an optional extra
  /// gradient on the finest pyramid level from the pose branch.
  void mtl_backward(const MtlPass<Scalar>& pass, const FeatureMap<Scalar>& d_det_raw,
                    const FeatureMap<Scalar>& d_seg_logits, const FeatureMap<Scalar>* d_p0_extra) {
    const Domain d = pass.domain;
    const std::size_t n = pass.pyramid.size();
    std::vector<FeatureMap<Scalar>> d_attended(n);
    for (std::size_t l = 0; l < n; ++l) {
      d_attended[l] = FeatureMap<Scalar>(pass.pyramid[l].channels, pass.pyramid[l].height,
                                         pass.pyramid[l].width);
    }
    if (d_det_raw.channels != 0) d_attended[0] += detector(d).backward(d_det_raw);
    if (d_seg_logits.channels != 0) {
      const auto d_seg = segmenter(d).backward(d_seg_logits);
      for (std::size_t l = 0; l < n; ++l) d_attended[l] += d_seg[l];
    }
    auto& attn = attention(d);
    std::vector<FeatureMap<Scalar>> d_pyramid(n);
    for (std::size_t l = 0; l < n; ++l) d_pyramid[l] = attn[l].backward(d_attended[l]);
    if (d_p0_extra) d_pyramid[0] += *d_p0_extra;
    encoder(d).backward(d_pyramid);
  }

  std::vector<Detection> detect(const MtlPass<Scalar>& pass, int image_height, int image_width,
                                double score_threshold = 0.3, double nms_iou = 0.5) const {
    return decode_detections(pass.det, image_height, image_width, score_threshold, nms_iou);
  }

  // --- pose branch -------------------------------------------------------
  // One instance at a time: begin_instance, then any of pose_heatmaps /
  // domain_probability with their backward calls, then end_instance which
  // returns the gradient on the finest pyramid level.

  FeatureMap<Scalar> begin_instance(const FeatureMap<Scalar>& p0, const Box& box,
                                    const Mask* mask, typename BlockMask<Scalar>::Rect hidden = {}) {
    FeatureMap<Scalar> f = roi_.forward(p0, box, ModelConfig::kFinestStride, config_.roi_size, mask);
    block_.set_rect(hidden);
    f = block_.forward(f);
    embedding_ = pose_enc_.forward(f);
    d_embedding_ = FeatureMap<Scalar>(embedding_.channels, embedding_.height, embedding_.width);
    return embedding_;
  }

  /// Heatmap probabilities, kNumKeypoints x (roi * stride)^2.
  FeatureMap<Scalar> pose_heatmaps() {
    return hm_sigmoid_.forward(pose_dec_.forward(embedding_));
  }
  void pose_backward(const FeatureMap<Scalar>& d_heatmaps) {
    d_embedding_ += pose_dec_.backward(hm_sigmoid_.backward(d_heatmaps));
  }

  /// Probability that the instance comes from the source domain.
  Scalar domain_probability() {
    const FeatureMap<Scalar> pooled = gap_.forward(embedding_);
    const FeatureMap<Scalar> logit = dom_cls_.forward(grl_.forward(pooled));
    return dc_sigmoid_.forward(logit).data(0, 0);
  }
  /// Takes the gradient on the classifier logit.
  void domain_backward(Scalar d_logit) {
    FeatureMap<Scalar> d(1, 1, 1);
    d.data(0, 0) = d_logit;
    d_embedding_ += gap_.backward(grl_.backward(dom_cls_.backward(d)));
  }

  FeatureMap<Scalar> end_instance() {
    return roi_.backward(block_.backward(pose_enc_.backward(d_embedding_)));
  }

  /// Copies parameter values from a model of the same configuration.
  template <typename Other>
  void copy_parameters_from(const Model<Other>& other) {
    std::map<std::string, const Matrix<Other>*> src;
    other.visit_params([&](std::string_view c, const std::string& n, Param<Other>& p) {
      src[std::string(c) + "/" + n] = &p.value;
    });
    visit_params([&](std::string_view c, const std::string& n, Param<Scalar>& p) {
      const auto it = src.find(std::string(c) + "/" + n);
      if (it == src.end() || it->second->rows() != p.value.rows() ||
          it->second->cols() != p.value.cols()) {
        throw std::invalid_argument("copy_parameters_from: architecture mismatch at " +
                                    std::string(c) + "/" + n);
      }
      p.value = it->second->template cast<Scalar>();
    });
  }

 private:
  std::vector<SpatialAttention<Scalar>>& attention(Domain d) {
    return d == Domain::kSource ? attn_m_ : attn_c_;
  }

  ModelConfig config_;
  FpnEncoder<Scalar> enc_c_, enc_m_;
  DetectionHead<Scalar> det_c_, det_m_;
  SegmentationHead<Scalar> seg_c_, seg_m_;
  PoseEncoder<Scalar> pose_enc_;
  PoseDecoder<Scalar> pose_dec_;
  DomainClassifier<Scalar> dom_cls_;

  std::vector<SpatialAttention<Scalar>> attn_c_, attn_m_;
  Sigmoid<Scalar> seg_sigmoid_;
  RoiAlign<Scalar> roi_;
  BlockMask<Scalar> block_;
  GlobalAvgPool<Scalar> gap_;
  GradReverse<Scalar> grl_;
  Sigmoid<Scalar> dc_sigmoid_, hm_sigmoid_;
  FeatureMap<Scalar> embedding_, d_embedding_;
};

/// Heatmap frame of an instance ROI for a given model configuration.
inline HeatmapFrame roi_heatmap_frame(const Box& box, const ModelConfig& cfg) {
  return HeatmapFrame::roi(box, cfg.heatmap_size(), cfg.heatmap_size());
}

template <typename Scalar>
Heatmaps<Scalar> as_heatmaps(const FeatureMap<Scalar>& probs, const HeatmapFrame& frame) {
  Heatmaps<Scalar> h(probs.height, probs.width, frame);
  h.data = probs.data;
  return h;
}

}  // namespace occpose::nn
