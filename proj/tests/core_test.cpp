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

#include <doctest.h>

#include <cmath>

#include "occpose/core/geometry.hpp"
#include "occpose/core/heatmap.hpp"
#include "occpose/core/types.hpp"
#include "test_util.hpp"

using namespace occpose;

namespace {

// Counts cells of a regular grid of pitch `res` whose centres fall in each box.
double grid_iou(const Box& a, const Box& b, double res) {
  const double x0 = std::min(a.x0, b.x0), y0 = std::min(a.y0, b.y0);
  const double x1 = std::max(a.x1, b.x1), y1 = std::max(a.y1, b.y1);
  const long nx = std::lround((x1 - x0) / res), ny = std::lround((y1 - y0) / res);
  long inter = 0, uni = 0;
  for (long i = 0; i < ny; ++i) {
    const double y = y0 + (i + 0.5) * res;
    const bool ya = y >= a.y0 && y < a.y1, yb = y >= b.y0 && y < b.y1;
    for (long j = 0; j < nx; ++j) {
      const double x = x0 + (j + 0.5) * res;
      const bool in_a = ya && x >= a.x0 && x < a.x1;
      const bool in_b = yb && x >= b.x0 && x < b.x1;
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  }
  return static_cast<double>(inter) / static_cast<double>(uni);
}

Keypoints all_labeled_at(double x, double y) {
  Keypoints k{};
  for (auto& p : k) p = {x, y, Visibility::kLabeledVisible};
  return k;
}

}  // namespace

TEST_CASE("box_iou examples") {
  CHECK(box_iou({0, 0, 2, 2}, {0, 0, 2, 2}) == 1.0);
  CHECK(box_iou({0, 0, 1, 1}, {5, 5, 6, 6}) == 0.0);
  const double oracle = grid_iou({0, 0, 2, 2}, {1, 1, 3, 3}, 0.001);
  CHECK(oracle == doctest::Approx(1.0 / 7.0).epsilon(1e-9));
  CHECK(box_iou({0, 0, 2, 2}, {1, 1, 3, 3}) == doctest::Approx(oracle).epsilon(1e-9));
  // Half-open convention: touching edges do not overlap.
  CHECK(box_iou({0, 0, 1, 1}, {1, 0, 2, 1}) == 0.0);
}

TEST_CASE("box_iou properties over random boxes") {
  Rng rng(11);
  for (int t = 0; t < 2000; ++t) {
    const Box a = testing::random_box(rng), b = testing::random_box(rng);
    const double ab = box_iou(a, b);
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    CHECK(ab == box_iou(b, a));
    CHECK(box_iou(a, a) == 1.0);
    if (!(a == b)) CHECK(ab < 1.0);
  }
}

TEST_CASE("mask_iou") {
  Mask a = Mask::Zero(4, 4);
  a.leftCols(2).setOnes();
  const Mask b = a.transpose();
  long inter = 0, uni = 0;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      inter += a(r, c) && b(r, c);
      uni += a(r, c) || b(r, c);
    }
  CHECK(mask_iou(a, b) == doctest::Approx(static_cast<double>(inter) / uni));
  CHECK(mask_iou(a, a) == 1.0);
  CHECK(mask_iou(a, Mask::Zero(4, 4)) == 0.0);
  CHECK(mask_iou(Mask::Zero(3, 3), Mask::Zero(3, 3)) == 1.0);
  CHECK_THROWS_AS(mask_iou(a, Mask::Zero(3, 4)), std::invalid_argument);
}

TEST_CASE("render_heatmaps") {
  const int stride = 4;
  const HeatmapFrame frame = HeatmapFrame::image(stride);
  // Cell (5, 3) centre in image pixels.
  const double px = frame.to_pixel_x(3), py = frame.to_pixel_y(5);
  Keypoints k = all_labeled_at(px, py);
  k[4].visibility = Visibility::kNotLabeled;
  const auto h = render_heatmaps<double>(k, 16, 16, stride, 2.0);

  CHECK(h.at(0, 5, 3) == 1.0);
  CHECK(h.data.row(4).sum() == 0.0);
  // Node at distance 2 cells from the peak.
  CHECK(h.at(0, 5, 5) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  CHECK(h.at(0, 7, 3) == doctest::Approx(0.6065306597).epsilon(1e-9));
  CHECK_THROWS_AS(render_heatmaps<double>(k, 4, 4, stride, 0.0), std::invalid_argument);
}

TEST_CASE("rendered heatmaps stay in [0, 1]") {
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    Keypoints k{};
    for (auto& p : k) {
      p.x = rng.uniform(-10, 70);
      p.y = rng.uniform(-10, 70);
      p.visibility = static_cast<Visibility>(rng.uniform_int(0, 2));
    }
    const auto h = render_heatmaps<float>(k, 16, 16, 4, rng.uniform(0.5, 4));
    CHECK(h.data.minCoeff() >= 0.0f);
    CHECK(h.data.maxCoeff() <= 1.0f);
  }
}

TEST_CASE("decode_heatmaps") {
  Heatmaps<double> h(8, 8, HeatmapFrame::image(2));
  CHECK(decode_heatmaps(h, 0.1)[0].visibility == Visibility::kNotLabeled);

  h.at(1, 2, 6) = 0.8;
  h.at(1, 5, 1) = 0.9;
  const auto k = decode_heatmaps(h, 0.1);
  CHECK(k[1].visibility == Visibility::kLabeledVisible);
  CHECK(k[1].x == h.frame.to_pixel_x(1));
  CHECK(k[1].y == h.frame.to_pixel_y(5));

  // Ties resolve to the first cell in row-major order.
  h.at(2, 3, 4) = 0.7;
  h.at(2, 3, 2) = 0.7;
  h.at(2, 6, 0) = 0.7;
  CHECK(decode_heatmaps(h, 0.1)[2].x == h.frame.to_pixel_x(2));

  CHECK_THROWS_AS(decode_heatmaps(h, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(decode_heatmaps(h, 1.0), std::invalid_argument);
}

TEST_CASE("decode inverts render for separated keypoints") {
  Rng rng(21);
  const int stride = 4;
  const double sigma = 2.0;
  for (int t = 0; t < 200; ++t) {
    Keypoints k{};
    for (int j = 0; j < kNumKeypoints; ++j) {
      k[j] = {rng.uniform(0, 95), rng.uniform(0, 95), Visibility::kLabeledVisible};
    }
    const auto h = render_heatmaps<double>(k, 24, 24, stride, sigma);
    const auto d = decode_heatmaps(h, 0.5);
    for (int j = 0; j < kNumKeypoints; ++j) {
      bool separated = true;
      for (int o = 0; o < kNumKeypoints; ++o) {
        if (o == j) continue;
        const double dist = std::hypot(k[o].x - k[j].x, k[o].y - k[j].y) / stride;
        separated = separated && dist >= 4 * sigma;
      }
      if (!separated) continue;
      CHECK(std::abs(d[j].x - k[j].x) <= stride / 2.0);
      CHECK(std::abs(d[j].y - k[j].y) <= stride / 2.0);
    }
  }
}

TEST_CASE("instance and sample validation") {
  Instance inst;
  inst.box = {2, 2, 10, 12};
  inst.mask = Mask::Zero(16, 16);
  CHECK_THROWS(validate(inst, 16, 16));
  inst.mask(5, 5) = 1;
  CHECK_NOTHROW(validate(inst, 16, 16));
  inst.visibility_ratio = 1.5;
  CHECK_THROWS(validate(inst, 16, 16));
  inst.visibility_ratio = 0.5;

  Keypoints k = all_labeled_at(6, 6);
  k[0].x = 40;  // far outside the expanded box
  inst.keypoints = k;
  CHECK_THROWS(validate(inst, 16, 16));

  Sample s;
  s.image = Image(16, 16);
  inst.keypoints = all_labeled_at(6, 6);
  s.instances = {inst};
  s.domain = Domain::kTarget;
  CHECK_THROWS(validate(s));
  s.domain = Domain::kSource;
  CHECK_NOTHROW(validate(s));
}
