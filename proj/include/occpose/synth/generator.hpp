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
#include <vector>

#include "occpose/core/types.hpp"
#include "occpose/synth/params.hpp"

namespace occpose::synth {

/// Renders one scene of stick-figure pedestrians. Deterministic in
/// (params, seed). Keypoints are kept only for the source domain.
Sample generate_sample(const DistributionParams& params, std::uint64_t seed);

/// Ground-truth keypoints of the scene `generate_sample` would render,
/// including target-domain scenes. Evaluation only: never fed to training.
std::vector<Keypoints> generate_pose_oracle(const DistributionParams& params,
                                            std::uint64_t seed);

/// Masks a fraction `p` of a fully visible instance with background-filled
/// rectangles, largest first. The achieved fraction lands within 0.02 of p.
/// Keypoints are kept; the covered ones become labeled-invisible.
Sample occlude_instance(const Sample& s, int instance_index, double p,
                        std::uint64_t seed);

/// Variant that also rewrites externally held keypoints (a target-domain
/// oracle, for instance) with the same visibility update.
Sample occlude_instance(const Sample& s, int instance_index, double p,
                        std::uint64_t seed, Keypoints* oracle_keypoints);

}  // namespace occpose::synth
