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

#include "occpose/core/types.hpp"
#include "occpose/train/config.hpp"

namespace occpose::train {

struct AugmentDraw {
  bool flip = false;
  double blur_sigma = 0.0;    // [0, 1.5]
  double brightness = 1.0;    // [0.8, 1.2]
};

AugmentDraw draw_augment(std::uint64_t seed, const AugmentToggles& toggles);

/// Mirror image, masks and boxes; keypoint x -> W - 1 - x with left/right
/// identities exchanged.
Sample flip_horizontal(const Sample& s);
Keypoints flip_keypoints(const Keypoints& k, int width);

/// Separable Gaussian blur with clamped borders; sigma 0 is the identity.
Image gaussian_blur(const Image& img, double sigma);
Image scale_brightness(const Image& img, double factor);

Sample apply_augment(const Sample& s, const AugmentDraw& d);
Sample augment(const Sample& s, std::uint64_t seed, const AugmentToggles& toggles);

}  // namespace occpose::train
