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

#include "occpose/synth/params.hpp"

#include "occpose/core/hash.hpp"

namespace occpose::synth {

DistributionParams DistributionParams::source_preset() {
  DistributionParams p;
  p.domain = Domain::kSource;
  p.min_pedestrians = 1;
  p.max_pedestrians = 2;
  p.limb_length_scale = 1.0;
  p.limb_width = 5.0;
  p.body_hue = 0.02;
  p.background_texture_scale = 6.0;
  p.noise_level = 0.02;
  p.occluder_rate = 0.15;
  p.rider_rate = 0.2;
  return p;
}

DistributionParams DistributionParams::target_preset() {
  DistributionParams p;
  p.domain = Domain::kTarget;
  p.min_pedestrians = 1;
  p.max_pedestrians = 3;
  p.limb_length_scale = 0.9;
  p.limb_width = 4.2;
  p.body_hue = 0.58;
  p.background_texture_scale = 18.0;
  p.noise_level = 0.06;
  p.occluder_rate = 0.35;
  p.rider_rate = 0.25;
  return p;
}

DistributionParams DistributionParams::preset(Domain d) {
  return d == Domain::kSource ? source_preset() : target_preset();
}

std::uint64_t DistributionParams::hash() const {
  Fnv1a h;
  h.update_value(static_cast<int>(domain));
  h.update_value(image_height);
  h.update_value(image_width);
  h.update_value(min_pedestrians);
  h.update_value(max_pedestrians);
  h.update_value(limb_length_scale);
  h.update_value(limb_width);
  h.update_value(body_hue);
  h.update_value(background_texture_scale);
  h.update_value(noise_level);
  h.update_value(occluder_rate);
  h.update_value(rider_rate);
  h.update_value(static_cast<int>(allow_overlap));
  return h.digest();
}

}  // namespace occpose::synth
