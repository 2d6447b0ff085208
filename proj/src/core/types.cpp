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

#include "occpose/core/types.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "occpose/core/hash.hpp"

namespace occpose {

std::string_view to_string(Domain d) {
  return d == Domain::kSource ? "source" : "target";
}

std::string_view to_string(Category c) {
  return c == Category::kPerson ? "person" : "rider";
}

Domain domain_from_string(std::string_view s) {
  if (s == "source") return Domain::kSource;
  if (s == "target") return Domain::kTarget;
  throw std::invalid_argument("unknown domain: " + std::string(s));
}

Category category_from_string(std::string_view s) {
  if (s == "person") return Category::kPerson;
  if (s == "rider") return Category::kRider;
  throw std::invalid_argument("unknown category: " + std::string(s));
}

bool Box::valid() const {
  return std::isfinite(x0) && std::isfinite(y0) && std::isfinite(x1) &&
         std::isfinite(y1) && x0 < x1 && y0 < y1;
}

Box Box::expanded(double fraction_of_diagonal) const {
  const double m =
      fraction_of_diagonal * std::hypot(width(), height());
  return {x0 - m, y0 - m, x1 + m, y1 + m};
}

Image::Image(int h, int w) : height(h), width(w) {
  for (auto& p : planes) p.setZero(h, w);
}

bool operator==(const Image& a, const Image& b) {
  if (a.height != b.height || a.width != b.width) return false;
  for (int c = 0; c < 3; ++c) {
    if (a.planes[c] != b.planes[c]) return false;
  }
  return true;
}

bool operator==(const Instance& a, const Instance& b) {
  if (!(a.box == b.box) || a.category != b.category ||
      a.visibility_ratio != b.visibility_ratio ||
      a.keypoints != b.keypoints) {
    return false;
  }
  if (a.mask.rows() != b.mask.rows() || a.mask.cols() != b.mask.cols()) {
    return false;
  }
  return a.mask == b.mask;
}

bool keypoint_inside(const Keypoint& kp, const Box& box) {
  const double ex = kp.x + 0.5, ey = kp.y + 0.5;
  return ex >= box.x0 && ex < box.x1 && ey >= box.y0 && ey < box.y1;
}

std::int64_t mask_count(const Mask& m) {
  return m.cast<std::int64_t>().sum();
}

std::optional<Box> mask_bounding_box(const Mask& m) {
  int r0 = -1, r1 = -1, c0 = static_cast<int>(m.cols()), c1 = -1;
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      if (!m(r, c)) continue;
      if (r0 < 0) r0 = r;
      r1 = r;
      c0 = std::min(c0, c);
      c1 = std::max(c1, c);
    }
  }
  if (r0 < 0) return std::nullopt;
  return Box{static_cast<double>(c0), static_cast<double>(r0),
             static_cast<double>(c1 + 1), static_cast<double>(r1 + 1)};
}

void validate(const Instance& inst, int image_height, int image_width,
              double keypoint_margin) {
  if (!inst.box.valid()) throw std::invalid_argument("instance: invalid box");
  if (inst.mask.rows() != image_height || inst.mask.cols() != image_width) {
    throw std::invalid_argument("instance: mask not aligned to image grid");
  }
  if (!(inst.visibility_ratio >= 0.0 && inst.visibility_ratio <= 1.0)) {
    throw std::invalid_argument("instance: visibility_ratio outside [0,1]");
  }
  const int r0 = std::max(0, static_cast<int>(std::floor(inst.box.y0)));
  const int r1 = std::min(image_height, static_cast<int>(std::ceil(inst.box.y1)));
  const int c0 = std::max(0, static_cast<int>(std::floor(inst.box.x0)));
  const int c1 = std::min(image_width, static_cast<int>(std::ceil(inst.box.x1)));
  bool any = false;
  for (int r = r0; r < r1 && !any; ++r) {
    for (int c = c0; c < c1; ++c) {
      if (inst.mask(r, c)) {
        any = true;
        break;
      }
    }
  }
  if (!any) throw std::invalid_argument("instance: mask empty inside box");
  if (inst.keypoints) {
    const Box grown = inst.box.expanded(keypoint_margin);
    for (const Keypoint& kp : *inst.keypoints) {
      if (kp.labeled() && !keypoint_inside(kp, grown)) {
        throw std::invalid_argument("instance: keypoint outside box margin");
      }
    }
  }
}

void validate(const Sample& s, double keypoint_margin) {
  for (const Instance& inst : s.instances) {
    validate(inst, s.image.height, s.image.width, keypoint_margin);
    if (s.domain == Domain::kTarget && inst.keypoints) {
      throw std::invalid_argument("sample: target-domain instance has keypoints");
    }
    if (s.domain == Domain::kSource && !inst.keypoints) {
      throw std::invalid_argument("sample: source-domain instance lacks keypoints");
    }
  }
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace occpose
