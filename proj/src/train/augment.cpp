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

#include "occpose/train/augment.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "occpose/core/rng.hpp"

namespace occpose::train {

AugmentDraw draw_augment(std::uint64_t seed, const AugmentToggles& toggles) {
  Rng rng(seed);
  AugmentDraw d;
  const bool flip = rng.bernoulli(0.5);
  const double sigma = rng.uniform(0.0, 1.5);
  const double gain = rng.uniform(0.8, 1.2);
  if (toggles.flip) d.flip = flip;
  if (toggles.blur) d.blur_sigma = sigma;
  if (toggles.brightness) d.brightness = gain;
  return d;
}

Keypoints flip_keypoints(const Keypoints& k, int width) {
  Keypoints out{};
  for (int i = 0; i < kNumKeypoints; ++i) {
    Keypoint kp = k[i];
    kp.x = width - 1 - kp.x;
    out[kFlipPartner[i]] = kp;
  }
  return out;
}

Sample flip_horizontal(const Sample& s) {
  Sample out = s;
  const int w = s.image.width;
  for (auto& plane : out.image.planes) plane = plane.rowwise().reverse().eval();
  for (Instance& inst : out.instances) {
    inst.mask = inst.mask.rowwise().reverse().eval();
    inst.box = {w - inst.box.x1, inst.box.y0, w - inst.box.x0, inst.box.y1};
    if (inst.keypoints) inst.keypoints = flip_keypoints(*inst.keypoints, w);
  }
  return out;
}

Image gaussian_blur(const Image& img, double sigma) {
  if (!(sigma > 0)) return img;
  const int radius = static_cast<int>(std::ceil(3 * sigma));
  std::vector<float> kernel(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = static_cast<float>(std::exp(-0.5 * i * i / (sigma * sigma)));
    sum += kernel[i + radius];
  }
  for (float& k : kernel) k = static_cast<float>(k / sum);
  Image out = img;
  const int h = img.height, w = img.width;
  for (auto& plane : out.planes) {
    auto tmp = plane;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        float acc = 0;
        for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * plane(y, std::clamp(x + i, 0, w - 1));
        tmp(y, x) = acc;
      }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        float acc = 0;
        for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * tmp(std::clamp(y + i, 0, h - 1), x);
        plane(y, x) = acc;
      }
  }
  return out;
}

Image scale_brightness(const Image& img, double factor) {
  if (factor == 1.0) return img;
  Image out = img;
  for (auto& plane : out.planes) {
    plane = (plane.array() * static_cast<float>(factor)).cwiseMax(0.0f).cwiseMin(1.0f).matrix();
  }
  return out;
}

Sample apply_augment(const Sample& s, const AugmentDraw& d) {
  Sample out = d.flip ? flip_horizontal(s) : s;
  out.image = scale_brightness(gaussian_blur(out.image, d.blur_sigma), d.brightness);
  return out;
}

Sample augment(const Sample& s, std::uint64_t seed, const AugmentToggles& toggles) {
  return apply_augment(s, draw_augment(seed, toggles));
}

}  // namespace occpose::train
