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
#include <string>

#include "occpose/core/types.hpp"

namespace occpose::synth {

/// Knobs of one synthetic distribution. The two presets differ in hue,
/// texture scale, noise, limb geometry and occlusion so that a measurable
/// domain gap exists between them.
struct DistributionParams {
  Domain domain = Domain::kSource;
  int image_height = 96;
  int image_width = 96;
  int min_pedestrians = 1;
  int max_pedestrians = 2;
  double limb_length_scale = 1.0;   // body height = 64 px * scale * jitter
  double limb_width = 5.0;          // capsule diameter in px
  double body_hue = 0.02;           // [0, 1)
  double background_texture_scale = 6.0;  // px between value-noise nodes
  double noise_level = 0.02;        // stddev of per-pixel noise
  double occluder_rate = 0.15;      // per pedestrian
  double rider_rate = 0.2;
  bool allow_overlap = true;

  static DistributionParams source_preset();
  static DistributionParams target_preset();
  static DistributionParams preset(Domain d);

  /// Fingerprint over every field, recorded in manifests.
  std::uint64_t hash() const;
  friend bool operator==(const DistributionParams&,
                         const DistributionParams&) = default;
};

}  // namespace occpose::synth
