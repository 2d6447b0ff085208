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

#include "occpose/metrics/evaluate.hpp"
#include "occpose/metrics/metrics.hpp"
#include "occpose/synth/dataset.hpp"
#include "oracles.hpp"

using namespace occpose;
using namespace occpose::metrics;

namespace {

Keypoints pose_at(double x, double y, double spread = 10) {
  Keypoints k{};
  for (int i = 0; i < kNumKeypoints; ++i) k[i] = {x + spread * std::cos(i), y + spread * std::sin(i), Visibility::kLabeledVisible};
  return k;
}

Keypoints shifted(Keypoints k, double dx) {
  for (auto& p : k) p.x += dx;
  return k;
}

bool same(const std::optional<double>& a, const std::optional<double>& b, double tol = 1e-9) {
  if (a.has_value() != b.has_value()) return false;
  return !a || std::abs(*a - *b) <= tol;
}

}  // namespace

TEST_CASE("oks examples") {
  const Keypoints gt = pose_at(50, 50);
  CHECK(oks(gt, gt, 900) == 1.0);

  // One joint off by d: exp(-d^2 / (2 a k^2)) on that joint, 1 elsewhere.
  const KappaTable kt = KappaTable::coco();
  Keypoints p = gt;
  p[0].x += 3;
  const double expected = (12 + std::exp(-9.0 / (2 * 900 * kt.kappa[0] * kt.kappa[0]))) / 13.0;
  CHECK(oks(p, gt, 900) == doctest::Approx(expected).epsilon(1e-12));

  // Unlabeled gt joints are skipped entirely.
  Keypoints partial = gt;
  for (int i = 1; i < kNumKeypoints; ++i) partial[i].visibility = Visibility::kNotLabeled;
  CHECK(oks(p, partial, 900) == doctest::Approx(std::exp(-9.0 / (2 * 900 * kt.kappa[0] * kt.kappa[0]))));

  CHECK_THROWS_AS(oks(gt, gt, 0), std::invalid_argument);
  Keypoints none{};
  CHECK_THROWS_AS(oks(gt, none, 100), std::invalid_argument);
}

TEST_CASE("oks is invariant to translation and to joint scaling with area") {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    Keypoints gt{}, pred{};
    for (int i = 0; i < kNumKeypoints; ++i) {
      gt[i] = {rng.uniform(0, 100), rng.uniform(0, 100), static_cast<Visibility>(rng.uniform_int(1, 2))};
      pred[i] = {gt[i].x + rng.normal() * 4, gt[i].y + rng.normal() * 4, Visibility::kLabeledVisible};
    }
    const double area = rng.uniform(200, 5000);
    const double base = oks(pred, gt, area);
    CHECK(base >= 0.0);
    CHECK(base <= 1.0);
    CHECK(oks(shifted(pred, 17), shifted(gt, 17), area) == doctest::Approx(base).epsilon(1e-12));
    const double s = rng.uniform(0.5, 3);
    Keypoints gs = gt, ps = pred;
    for (int i = 0; i < kNumKeypoints; ++i) {
      gs[i].x *= s;
      gs[i].y *= s;
      ps[i].x *= s;
      ps[i].y *= s;
    }
    CHECK(oks(ps, gs, area * s * s) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("interpolated_ap") {
  CHECK(interpolated_ap({}, {}) == 0.0);
  CHECK(interpolated_ap({1.0}, {1.0}) == 1.0);
  // Half recall at full precision: recall points 0..0.5 count.
  CHECK(interpolated_ap({0.5}, {1.0}) == doctest::Approx(51.0 / 101.0));
  // A later higher precision lifts the earlier point.
  CHECK(interpolated_ap({0.5, 0.5, 1.0}, {1.0, 0.5, 0.6667}) == doctest::Approx((51 * 1.0 + 50 * 0.6667) / 101.0));
}

TEST_CASE("keypoint AP on hand-built cases") {
  KeypointImage img;
  img.gts.push_back({pose_at(40, 40), 900});
  img.gts.push_back({pose_at(120, 40), 900});
  img.preds.push_back({pose_at(40, 40), 0.9, 900});
  img.preds.push_back({pose_at(120, 40), 0.8, 900});
  CHECK(keypoint_ap_at({img}, 0.5) == doctest::Approx(1.0));
  CHECK(keypoint_ap({img}).ap == doctest::Approx(1.0));

  // A top-scored false positive caps the interpolated precision at 2/3.
  KeypointImage fp = img;
  fp.preds.push_back({pose_at(300, 300), 0.95, 900});
  CHECK(*keypoint_ap_at({fp}, 0.5) == doctest::Approx(2.0 / 3.0));
  // Ranked last it only costs the final precision point.
  fp.preds.back().score = 0.1;
  CHECK(*keypoint_ap_at({fp}, 0.5) == doctest::Approx(1.0));

  // Duplicate detections: the second one on the same gt is a false positive.
  KeypointImage dup;
  dup.gts.push_back({pose_at(40, 40), 900});
  dup.preds.push_back({pose_at(40, 40), 0.9, 900});
  dup.preds.push_back({pose_at(40, 40), 0.8, 900});
  CHECK(keypoint_ap_at({dup}, 0.5) == doctest::Approx(1.0));

  // Ignored gts neither count nor penalise the prediction on them.
  KeypointImage ign = img;
  ign.gts[1].ignore = true;
  ign.preds.push_back({pose_at(120, 40), 0.99, 900});
  CHECK(keypoint_ap_at({ign}, 0.5) == doctest::Approx(1.0));

  KeypointImage none;
  none.gts.push_back({pose_at(40, 40), 900, true});
  CHECK_FALSE(keypoint_ap_at({none}, 0.5).has_value());
  // Area 900 is below the medium range.
  CHECK_FALSE(keypoint_ap({img}).ap_m.has_value());
  CHECK_FALSE(keypoint_ap({img}).ap_l.has_value());
  KeypointImage medium = img;
  for (auto& g : medium.gts) g.area = 2000;
  CHECK(keypoint_ap({medium}).ap_m.has_value());
  CHECK_FALSE(keypoint_ap({medium}).ap_l.has_value());
}

TEST_CASE("keypoint AP matches the brute-force oracle") {
  Rng rng(101);
  const KappaTable kt = KappaTable::coco();
  for (int t = 0; t < 300; ++t) {
    const auto images = testing::random_keypoint_case(rng);
    const ApSuite s = keypoint_ap(images);
    CHECK(same(s.ap, testing::ap_mean_reference(images, kAreaAll, kt)));
    CHECK(same(s.ap50, testing::ap_reference(images, 0.5, kAreaAll, kt)));
    CHECK(same(s.ap75, testing::ap_reference(images, 0.75, kAreaAll, kt)));
    CHECK(same(s.ap_m, testing::ap_mean_reference(images, kAreaMedium, kt)));
    CHECK(same(s.ap_l, testing::ap_mean_reference(images, kAreaLarge, kt)));
  }
}

TEST_CASE("keypoint AP depends on scores only through their order") {
  Rng rng(7);
  for (int t = 0; t < 200; ++t) {
    auto images = testing::random_keypoint_case(rng);
    const auto before = keypoint_ap(images).ap;
    for (auto& img : images)
      for (auto& p : img.preds) p.score = 0.1 + 0.5 * p.score * p.score;
    CHECK(same(before, keypoint_ap(images).ap, 0.0));
    if (before) {
      CHECK(*before >= 0.0);
      CHECK(*before <= 1.0);
    }
  }
}

TEST_CASE("miss rate on hand-built cases") {
  // One reasonable gt and one heavily occluded gt, both found.
  BoxImage img;
  img.gts.push_back({{0, 0, 10, 30}, 0.9});
  img.gts.push_back({{50, 0, 60, 30}, 0.4});
  img.dets.push_back({{0, 0, 10, 30}, 0.9});
  img.dets.push_back({{50, 0, 60, 30}, 0.8});
  CHECK(*miss_rate({img}, VisibilityBin::kReasonable) == doctest::Approx(1e-10));
  CHECK(*miss_rate({img}, VisibilityBin::kHeavyOcclusion) == doctest::Approx(1e-10));
  CHECK(*miss_rate({img}, VisibilityBin::kReasonableHeavy) == doctest::Approx(1e-10));

  // No detections at all: every reference point misses everything.
  BoxImage empty = img;
  empty.dets.clear();
  CHECK(*miss_rate({empty}, VisibilityBin::kReasonable) == 1.0);

  // A confident false positive per image pushes fppi to 1 before any hit,
  // so every reference below 1 sees miss 1 and the last sees miss 0.
  BoxImage fp = img;
  fp.dets.push_back({{100, 100, 110, 130}, 0.99});
  const double expected = std::exp((8 * std::log(1.0) + std::log(1e-10)) / 9.0);
  CHECK(*miss_rate({fp}, VisibilityBin::kReasonableHeavy) == doctest::Approx(expected));

  // Gts of other bins absorb their detections even when ranked first.
  BoxImage absorbed = img;
  absorbed.dets[1].score = 0.99;
  CHECK(*miss_rate({absorbed}, VisibilityBin::kReasonable) == doctest::Approx(1e-10));
  BoxImage only_ho;
  only_ho.gts.push_back({{50, 0, 60, 30}, 0.4});
  CHECK_FALSE(miss_rate({only_ho}, VisibilityBin::kReasonable).has_value());

  CHECK(in_bin(0.65, VisibilityBin::kReasonable));
  CHECK_FALSE(in_bin(0.65, VisibilityBin::kHeavyOcclusion));
  CHECK(in_bin(0.2, VisibilityBin::kHeavyOcclusion));
  CHECK_FALSE(in_bin(0.19, VisibilityBin::kReasonableHeavy));
  const auto refs = fppi_references();
  CHECK(refs.front() == doctest::Approx(0.01));
  CHECK(refs.back() == doctest::Approx(1.0));
}

TEST_CASE("miss rate matches the brute-force oracle") {
  Rng rng(202);
  for (int t = 0; t < 300; ++t) {
    const auto images = testing::random_box_case(rng);
    for (VisibilityBin bin : {VisibilityBin::kReasonable, VisibilityBin::kHeavyOcclusion, VisibilityBin::kReasonableHeavy}) {
      const auto mr = miss_rate(images, bin);
      CHECK(same(mr, testing::miss_rate_reference(images, bin)));
      if (mr) {
        CHECK(*mr > 0.0);
        CHECK(*mr <= 1.0);
      }
    }
  }
}

TEST_CASE("instance IoU on a crossed case") {
  // Greedy takes the single best pair first even when that lowers the total.
  Mask g0 = Mask::Zero(4, 4), g1 = Mask::Zero(4, 4), p0 = Mask::Zero(4, 4), p1 = Mask::Zero(4, 4);
  g0.block(0, 0, 2, 4).setOnes();
  g1.block(2, 0, 2, 4).setOnes();
  p0.block(0, 0, 3, 4).setOnes();  // IoU 2/3 with g0, 1/3 with g1
  p1.block(3, 0, 1, 4).setOnes();  // IoU 1/2 with g1
  SegImage img;
  img.gts = {{g0, Category::kPerson}, {g1, Category::kPerson}};
  img.preds = {{p1, Category::kPerson}, {p0, Category::kPerson}};
  CHECK(*instance_seg_iou({img}, Category::kPerson) == doctest::Approx((2.0 / 3.0 + 0.5) / 2));
  CHECK_FALSE(instance_seg_iou({img}, Category::kRider).has_value());

  // Predictions of the other category do not match.
  img.preds[1].category = Category::kRider;
  CHECK(*instance_seg_iou({img}, Category::kPerson) == doctest::Approx(0.5 / 2));
}

TEST_CASE("instance IoU matches the brute-force oracle") {
  Rng rng(303);
  for (int t = 0; t < 300; ++t) {
    const auto images = testing::random_seg_case(rng);
    for (Category c : {Category::kPerson, Category::kRider}) {
      const auto v = instance_seg_iou(images, c);
      CHECK(same(v, testing::seg_iou_reference(images, c)));
      if (v) {
        CHECK(*v >= 0.0);
        CHECK(*v <= 1.0);
      }
    }
  }
}

TEST_CASE("occlusion sweep") {
  const auto data = synth::build_dataset(synth::DistributionParams::source_preset(), 12, 77);
  const auto items = pose_eval_items(data);
  REQUIRE(items.size() == 12);

  // Reads the scene it is handed, so it sees the occluded keypoints.
  auto perfect = [](const Sample& s) {
    std::vector<KeypointPrediction> out;
    for (const Instance& inst : s.instances) out.push_back({*inst.keypoints, 0.9, inst.box.area()});
    return out;
  };
  auto visible_only = [](const Sample& s) {
    std::vector<KeypointPrediction> out;
    for (const Instance& inst : s.instances) {
      Keypoints k = *inst.keypoints;
      for (auto& p : k)
        if (p.visibility != Visibility::kLabeledVisible) p.x += 40;
      out.push_back({k, inst.visibility_ratio, inst.box.area()});
    }
    return out;
  };
  const std::vector<double> fractions = {0.0, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  const auto ideal = occlusion_sweep(items, perfect, fractions, {1, 2});
  REQUIRE(ideal.size() == fractions.size());
  for (const SweepPoint& p : ideal) {
    CHECK(p.mean == doctest::Approx(1.0));
    CHECK(p.per_seed.size() == 2);
    CHECK(p.stddev == doctest::Approx(0.0));
  }
  const auto degraded = occlusion_sweep(items, visible_only, fractions, {1, 2, 3});
  CHECK(degraded.front().mean == doctest::Approx(1.0));
  CHECK(degraded.back().mean < degraded.front().mean);
  const auto again = occlusion_sweep(items, visible_only, fractions, {1, 2, 3});
  for (std::size_t i = 0; i < fractions.size(); ++i) CHECK(again[i].per_seed == degraded[i].per_seed);
  CHECK(default_sweep_fractions() == std::vector<double>{0.2, 0.3, 0.4, 0.5, 0.6, 0.7});
}

TEST_CASE("eval report flat round trip") {
  EvalReport r;
  r.keypoint.ap = 0.25;
  r.keypoint.ap50 = 0.5;
  r.mr_r = 0.125;
  r.iou_person = 1.0 / 3.0;
  r.sweep.push_back({0.2, 0.1, 0.01, {0.09, 0.11}});
  const EvalReport back = EvalReport::from_flat(r.to_flat());
  CHECK(back.keypoint.ap == r.keypoint.ap);
  CHECK(back.keypoint.ap50 == r.keypoint.ap50);
  CHECK_FALSE(back.keypoint.ap_l.has_value());
  CHECK(back.mr_r == r.mr_r);
  CHECK_FALSE(back.mr_ho.has_value());
  CHECK(back.iou_person == r.iou_person);
  REQUIRE(back.sweep.size() == 1);
  CHECK(back.sweep[0].mean == 0.1);
  CHECK(r.to_text().find("AP") != std::string::npos);
}
