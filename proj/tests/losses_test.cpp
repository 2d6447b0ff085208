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

#include "occpose/losses/losses.hpp"
#include "test_util.hpp"

using namespace occpose;
using namespace occpose::losses;
using nn::FeatureMap;
using nn::Matrix;

namespace {

Keypoints labeled_keypoints() {
  Keypoints k{};
  for (auto& p : k) p.visibility = Visibility::kLabeledVisible;
  return k;
}

Matrix<double> random_matrix(Rng& rng, int rows, int cols, double lo, double hi) {
  Matrix<double> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
  return m;
}

DetectionTargets one_positive(int h, int w, int r, int c, std::array<double, 4> offsets, int category) {
  DetectionTargets t;
  t.height = h;
  t.width = w;
  t.positive = Eigen::Matrix<std::uint8_t, 1, Eigen::Dynamic>::Zero(h * w);
  t.category = Eigen::Matrix<int, 1, Eigen::Dynamic>::Zero(h * w);
  t.offsets = Eigen::Matrix<double, 4, Eigen::Dynamic>::Zero(4, h * w);
  const int i = r * w + c;
  t.positive(i) = 1;
  t.category(i) = category;
  for (int k = 0; k < 4; ++k) t.offsets(k, i) = offsets[k];
  t.num_positive = 1;
  return t;
}

}  // namespace

TEST_CASE("default weights") {
  const LossWeights w;
  CHECK(w.alpha == 0.5);
  CHECK(w.beta == 1.0);
  CHECK(w.gamma == 1.0);
}

TEST_CASE("total_loss") {
  LossBreakdown p{1, 1, 1, 1, 1, 1};
  CHECK(total_loss(p, LossWeights{}) == 5.0);
  CHECK(total_loss(LossBreakdown{}, LossWeights{}) == 0.0);
  CHECK(total_loss(LossBreakdown{2, 1, 4, 2, 3, 5}, LossWeights{}) == 14.0);
  CHECK(with_total(p, LossWeights{}).total == 5.0);

  p.dc = std::nan("");
  try {
    total_loss(p, LossWeights{});
    FAIL("non-finite part accepted");
  } catch (const std::domain_error& e) {
    CHECK(std::string(e.what()).find("dc") != std::string::npos);
  }
  p.dc = 1;
  p.seg_m = -1;
  CHECK_THROWS_AS(total_loss(p, LossWeights{}), std::domain_error);
  p.seg_m = 1;
  p.pe = INFINITY;
  CHECK_THROWS_AS(total_loss(p, LossWeights{}), std::domain_error);
}

TEST_CASE("total_loss is the weighted linear form") {
  Rng rng(1);
  for (int t = 0; t < 1000; ++t) {
    LossBreakdown p{rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(0, 10),
                    rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(0, 10)};
    const LossWeights w{rng.uniform(0, 3), rng.uniform(0, 3), rng.uniform(0, 3)};
    const long double oracle = static_cast<long double>(p.pe) * w.gamma +
                               static_cast<long double>(p.dc) * w.beta +
                               (static_cast<long double>(p.seg_m) + p.seg_c) * w.alpha +
                               p.det_m + p.det_c;
    const double got = total_loss(p, w);
    CHECK(std::abs(got - static_cast<double>(oracle)) <= 1e-12 * std::abs(static_cast<double>(oracle)));

    // Slopes.
    const double base = got;
    const double coeff[6] = {1, 1, w.alpha, w.alpha, w.beta, w.gamma};
    double* fields[6] = {&p.det_c, &p.det_m, &p.seg_c, &p.seg_m, &p.dc, &p.pe};
    for (int k = 0; k < 6; ++k) {
      *fields[k] += 0.5;
      CHECK(total_loss(p, w) - base == doctest::Approx(0.5 * coeff[k]).epsilon(1e-9));
      *fields[k] -= 0.5;
    }
  }
  LossBreakdown p{1, 2, 3, 4, 5, 6};
  LossWeights w{0.5, 0.0, 0.0};
  const double a = total_loss(p, w);
  p.dc = 1e6;
  p.pe = 42;
  CHECK(total_loss(p, w) == a);
}

TEST_CASE("seg_loss") {
  Mask gt = Mask::Zero(4, 6);
  gt.block(1, 1, 2, 3).setOnes();
  const Matrix<double> exact = gt.cast<double>();
  CHECK(seg_loss(exact, gt) <= 1e-6);
  CHECK(seg_loss(Matrix<double>::Constant(4, 6, 0.5), gt) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Rng rng(2);
  const Matrix<double> pred = random_matrix(rng, 4, 6, 0.01, 0.99);
  Matrix<double> pred2(4, 12);
  pred2 << pred, pred;
  Mask gt2(4, 12);
  gt2 << gt, gt;
  CHECK(seg_loss(pred2, gt2) == doctest::Approx(seg_loss(pred, gt)).epsilon(1e-12));
  CHECK_THROWS_AS(seg_loss(pred, Mask::Zero(4, 5)), std::invalid_argument);

  // Gradients in probability and logit space.
  const Matrix<double> target = gt.cast<double>();
  Matrix<double> p = pred, g;
  seg_loss<double>(p, target, &g);
  for (int i = 0; i < 24; ++i) {
    const double fd = testing::central_difference([&] { return seg_loss<double>(p, target, nullptr); }, p.data()[i]);
    CHECK(testing::rel_err(fd, g.data()[i]) < 1e-4);
  }
  Matrix<double> z = random_matrix(rng, 4, 6, -3, 3);
  auto sigmoid = [](const Matrix<double>& m) { return Matrix<double>((1.0 + (-m.array()).exp()).inverse()); };
  const Matrix<double> gz = seg_logit_grad<double>(sigmoid(z), target);
  for (int i = 0; i < 24; ++i) {
    const double fd = testing::central_difference([&] { return seg_loss<double>(sigmoid(z), target, nullptr); }, z.data()[i]);
    CHECK(testing::rel_err(fd, gz.data()[i]) < 1e-4);
  }
}

TEST_CASE("det_loss at encoded targets vanishes") {
  const int h = 6, w = 6;
  const auto t = one_positive(h, w, 2, 3, {0.2, -0.1, 0.3, 0.5}, 1);
  FeatureMap<double> raw(nn::kDetHeadChannels, h, w);
  raw.data.row(0).setConstant(-40);
  raw.at(0, 2, 3) = 40;
  raw.data.row(1).setConstant(-40);
  raw.data.row(2).setConstant(-40);
  raw.at(2, 2, 3) = 40;
  for (int k = 0; k < 4; ++k) raw.at(3 + k, 2, 3) = t.offsets(k, 2 * w + 3);
  const DetLoss l = det_loss(nn::activate_head(raw, 2), t, static_cast<FeatureMap<double>*>(nullptr));
  CHECK(l.total <= 1e-6);
  CHECK_FALSE(l.no_positive);
}

TEST_CASE("det_loss with no instances is a pure focal sum") {
  const int h = 5, w = 7;
  DetectionTargets t;
  t.height = h;
  t.width = w;
  t.positive = Eigen::Matrix<std::uint8_t, 1, Eigen::Dynamic>::Zero(h * w);
  t.category = Eigen::Matrix<int, 1, Eigen::Dynamic>::Zero(h * w);
  t.offsets = Eigen::Matrix<double, 4, Eigen::Dynamic>::Zero(4, h * w);
  const FeatureMap<double> raw(nn::kDetHeadChannels, h, w);
  const DetLoss l = det_loss(nn::activate_head(raw, 2), t, static_cast<FeatureMap<double>*>(nullptr));
  double oracle = 0;
  for (int i = 0; i < h * w; ++i) oracle += -(1 - 0.25) * std::pow(0.5, 2) * std::log(1 - 0.5);
  CHECK(l.no_positive);
  CHECK(l.total == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(l.box == 0.0);
  CHECK(l.cls == 0.0);
}

TEST_CASE("det_loss smooth-L1 branch") {
  const auto t = one_positive(4, 4, 1, 1, {0, 0, 0, 0}, 0);
  FeatureMap<double> raw(nn::kDetHeadChannels, 4, 4);
  for (int k = 0; k < 4; ++k) raw.at(3 + k, 1, 1) = 0.5;
  CHECK(det_loss(nn::activate_head(raw, 2), t, static_cast<FeatureMap<double>*>(nullptr)).box == doctest::Approx(4 * 0.125).epsilon(1e-12));
  for (int k = 0; k < 4; ++k) raw.at(3 + k, 1, 1) = -2.0;
  CHECK(det_loss(nn::activate_head(raw, 2), t, static_cast<FeatureMap<double>*>(nullptr)).box == doctest::Approx(4 * 1.5).epsilon(1e-12));
}

TEST_CASE("det_loss gradient with respect to raw head channels") {
  Rng rng(3);
  const std::vector<Box> boxes = {{2, 3, 12, 20}, {9, 1, 15, 9}};
  const auto t = nn::encode_targets(boxes, {Category::kPerson, Category::kRider}, 12, 10, 2);
  REQUIRE(t.num_positive > 0);
  FeatureMap<double> raw = testing::random_map<double>(rng, nn::kDetHeadChannels, 12, 10);
  FeatureMap<double> g;
  det_loss(nn::activate_head(raw, 2), t, &g);
  auto loss = [&] { return det_loss(nn::activate_head(raw, 2), t, static_cast<FeatureMap<double>*>(nullptr)).total; };
  for (int s = 0; s < 100; ++s) {
    const auto i = static_cast<Eigen::Index>(rng.next_u64() % raw.data.size());
    const double fd = testing::central_difference(loss, raw.data.data()[i]);
    CHECK(testing::rel_err(fd, g.data.data()[i]) < 1e-4);
  }
}

TEST_CASE("pose_loss") {
  Rng rng(4);
  const int n = 36;
  const Matrix<double> target = random_matrix(rng, kNumKeypoints, n, 0, 0.9);
  Keypoints k = labeled_keypoints();
  CHECK(pose_loss<double>(target, target, k, nullptr).value == 0.0);
  const Matrix<double> shifted = target.array() + 0.1;
  CHECK(pose_loss<double>(shifted, target, k, nullptr).value == doctest::Approx(0.01).epsilon(1e-12));

  k[5].visibility = Visibility::kNotLabeled;
  k[7].visibility = Visibility::kLabeledInvisible;
  const Matrix<double> pred = random_matrix(rng, kNumKeypoints, n, 0, 1);
  double sum = 0;
  for (int c = 0; c < kNumKeypoints; ++c) {
    if (c == 5) continue;
    for (int i = 0; i < n; ++i) sum += (pred(c, i) - target(c, i)) * (pred(c, i) - target(c, i));
  }
  const PoseLoss l = pose_loss<double>(pred, target, k, nullptr);
  CHECK(l.included_channels == 12);
  CHECK(l.value == doctest::Approx(sum / (12.0 * n)).epsilon(1e-12));

  Matrix<double> p = pred, g;
  pose_loss<double>(p, target, k, &g);
  CHECK(g.row(5).isZero(0));
  for (int s = 0; s < 60; ++s) {
    const auto i = static_cast<Eigen::Index>(rng.next_u64() % p.size());
    const double fd = testing::central_difference([&] { return pose_loss<double>(p, target, k, nullptr).value; }, p.data()[i]);
    CHECK(testing::rel_err(fd, g.data()[i]) < 1e-4);
  }

  const PoseLoss none = pose_loss<double>(pred, target, Keypoints{}, nullptr);
  CHECK(none.value == 0.0);
  CHECK(none.no_labeled);
  CHECK_THROWS_AS(pose_loss<double>(pred, Matrix<double>::Zero(kNumKeypoints, n + 1), k, nullptr),
                  std::invalid_argument);
}

TEST_CASE("domain_loss") {
  CHECK(domain_loss(0.5, Domain::kSource, static_cast<double*>(nullptr)) == doctest::Approx(std::log(2.0)));
  CHECK(domain_loss(0.5, Domain::kTarget, static_cast<double*>(nullptr)) == doctest::Approx(0.6931471806));
  CHECK(domain_loss(1.0 - 1e-12, Domain::kSource, static_cast<double*>(nullptr)) <= 1.1e-7);
  CHECK(domain_loss(0.9, Domain::kTarget, static_cast<double*>(nullptr)) ==
        doctest::Approx(-std::log(0.1)).epsilon(1e-12));
  CHECK(domain_loss(0.9, Domain::kTarget, static_cast<double*>(nullptr)) == doctest::Approx(2.302585093));

  for (Domain d : {Domain::kSource, Domain::kTarget}) {
    for (double z : {-3.0, -0.4, 0.0, 1.2, 4.0}) {
      double zz = z;
      auto f = [&] { return domain_loss(1.0 / (1.0 + std::exp(-zz)), d, static_cast<double*>(nullptr)); };
      const double fd = testing::central_difference(f, zz);
      CHECK(testing::rel_err(fd, domain_logit_grad(1.0 / (1.0 + std::exp(-z)), d)) < 1e-4);
    }
  }
}

TEST_CASE("losses are non-negative") {
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    const Matrix<double> a = random_matrix(rng, kNumKeypoints, 9, 0, 1);
    const Matrix<double> b = random_matrix(rng, kNumKeypoints, 9, 0, 1);
    CHECK(seg_loss<double>(a, b.array().round().matrix(), nullptr) >= 0);
    CHECK(pose_loss<double>(a, b, labeled_keypoints(), nullptr).value >= 0);
    CHECK(domain_loss(rng.uniform(), Domain::kSource, static_cast<double*>(nullptr)) >= 0);
  }
}
