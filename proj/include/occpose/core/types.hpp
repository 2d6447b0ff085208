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
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace occpose {

inline constexpr int kNumKeypoints = 13;

// COCO's 17 keypoints without the eyes and ears.
enum class Joint : int {
  kNose = 0,
  kLeftShoulder,
  kRightShoulder,
  kLeftElbow,
  kRightElbow,
  kLeftWrist,
  kRightWrist,
  kLeftHip,
  kRightHip,
  kLeftKnee,
  kRightKnee,
  kLeftAnkle,
  kRightAnkle,
};

inline constexpr std::array<std::string_view, kNumKeypoints> kJointNames = {
    "nose",       "left_shoulder", "right_shoulder", "left_elbow",
    "right_elbow", "left_wrist",   "right_wrist",    "left_hip",
    "right_hip",  "left_knee",     "right_knee",     "left_ankle",
    "right_ankle"};

// Index of the mirror-image joint under a horizontal flip.
inline constexpr std::array<int, kNumKeypoints> kFlipPartner = {
    0, 2, 1, 4, 3, 6, 5, 8, 7, 10, 9, 12, 11};

enum class Domain : std::uint8_t { kSource, kTarget };
enum class Category : std::uint8_t { kPerson, kRider };
inline constexpr int kNumCategories = 2;

// COCO semantics: 0 = not labeled, 1 = labeled but not visible, 2 = visible.
enum class Visibility : std::uint8_t {
  kNotLabeled = 0,
  kLabeledInvisible = 1,
  kLabeledVisible = 2,
};

std::string_view to_string(Domain d);
std::string_view to_string(Category c);
Domain domain_from_string(std::string_view s);
Category category_from_string(std::string_view s);

/// Axis-aligned box in continuous edge coordinates, half-open
/// [x0, x1) x [y0, y1). Pixel (u, v) covers [u, u+1) x [v, v+1).
struct Box {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  bool valid() const;
  Box expanded(double fraction_of_diagonal) const;

  friend bool operator==(const Box&, const Box&) = default;
};

/// Keypoint in pixel-index coordinates: (u, v) is the centre of pixel (u, v),
/// i.e. edge coordinate (u + 0.5, v + 0.5).
struct Keypoint {
  double x = 0, y = 0;
  Visibility visibility = Visibility::kNotLabeled;

  bool labeled() const { return visibility != Visibility::kNotLabeled; }
  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

using Keypoints = std::array<Keypoint, kNumKeypoints>;

/// Binary raster, row-major (rows = image height).
using Mask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic,
                           Eigen::RowMajor>;

/// H x W x 3 image; one row-major plane per colour channel.
struct Image {
  int height = 0, width = 0;
  std::array<Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic,
                           Eigen::RowMajor>,
             3>
      planes;

  Image() = default;
  Image(int h, int w);
  friend bool operator==(const Image& a, const Image& b);
};

struct Instance {
  Box box;
  Mask mask;
  std::optional<Keypoints> keypoints;
  Category category = Category::kPerson;
  double visibility_ratio = 1.0;

  friend bool operator==(const Instance& a, const Instance& b);
};

struct Sample {
  Image image;
  std::vector<Instance> instances;
  Domain domain = Domain::kSource;
  std::string sample_id;
  std::uint64_t rng_seed = 0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Throws std::invalid_argument describing the first violated invariant.
void validate(const Instance& inst, int image_height, int image_width,
              double keypoint_margin = 0.1);
void validate(const Sample& s, double keypoint_margin = 0.1);

bool keypoint_inside(const Keypoint& kp, const Box& box);

std::int64_t mask_count(const Mask& m);
/// Tight box around the set pixels; nullopt for an empty mask.
std::optional<Box> mask_bounding_box(const Mask& m);

}  // namespace occpose
