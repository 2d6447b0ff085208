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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "occpose/metrics/inference.hpp"
#include "occpose/metrics/metrics.hpp"
#include "occpose/synth/dataset.hpp"

namespace occpose::metrics {

/// A scene together with full-pose ground truth for each instance.
struct PoseEvalItem {
  Sample sample;
  std::vector<Keypoints> gt;
};

/// Source samples use their own keypoints, target samples the pose oracle.
std::vector<PoseEvalItem> pose_eval_items(const synth::Dataset& d);

using PosePredictor = std::function<std::vector<KeypointPrediction>(const Sample&)>;

/// Scored keypoint sets from `predict`, one per detection with a pose.
std::vector<KeypointPrediction> keypoint_predictions(const std::vector<InstancePrediction>& preds);
PosePredictor model_predictor(nn::Model<float>& model, const InferenceOptions& opts = {});

std::vector<double> default_sweep_fractions();

struct SweepPoint {
  double fraction = 0;
  double mean = 0;
  double stddev = 0;   // sample standard deviation over seeds
  std::vector<double> per_seed;
};

/// Occludes every fully visible instance in turn; the occluded instance is
/// the only evaluable gt of its image, the others are ignore regions.
/// Rectangle placement depends on (seed, instance), not on the fraction.
std::vector<SweepPoint> occlusion_sweep(const std::vector<PoseEvalItem>& items,
                                        const PosePredictor& predictor,
                                        const std::vector<double>& fractions,
                                        const std::vector<std::uint64_t>& seeds,
                                        const KappaTable& kappas = KappaTable::coco());

struct EvalReport {
  ApSuite keypoint;                      // source eval split
  std::optional<ApSuite> target_keypoint;
  std::optional<double> mr_r, mr_ho, mr_rho;
  std::optional<double> iou_person, iou_rider;
  std::vector<SweepPoint> sweep;

  std::string to_text() const;
  /// One key=value per line; missing values are written as "absent".
  std::string to_flat() const;
  static EvalReport from_flat(const std::string& text);
};

struct EvalOptions {
  InferenceOptions inference;
  bool occlusion_sweep = false;
  std::vector<double> sweep_fractions = default_sweep_fractions();
  std::vector<std::uint64_t> sweep_seeds = {1, 2, 3};
};

/// Keypoint AP on both splits; miss rate and instance IoU on the target
/// split; optional sweep on the source split.
EvalReport evaluate(nn::Model<float>& model, const synth::Dataset& source_eval,
                    const synth::Dataset* target_eval, const EvalOptions& opts = {});

struct AblationRow {
  std::string backbone;
  ApSuite keypoint;
  std::optional<ApSuite> target_keypoint;
};

std::string ablation_text(const std::vector<AblationRow>& rows);
std::string ablation_flat(const std::vector<AblationRow>& rows);

}  // namespace occpose::metrics
