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

#include "occpose/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "occpose/core/geometry.hpp"

namespace occpose::metrics {

KappaTable KappaTable::coco() {
  // nose, shoulders, elbows, wrists, hips, knees, ankles
  constexpr std::array<double, kNumKeypoints> sigma = {
      0.026, 0.079, 0.079, 0.072, 0.072, 0.062, 0.062,
      0.107, 0.107, 0.087, 0.087, 0.089, 0.089};
  KappaTable t;
  for (int i = 0; i < kNumKeypoints; ++i) t.kappa[i] = 2 * sigma[i];
  return t;
}

double oks(const Keypoints& pred, const Keypoints& gt, double area, const KappaTable& kappas) {
  if (!(area > 0)) throw std::invalid_argument("oks: area must be > 0");
  double sum = 0;
  int n = 0;
  for (int i = 0; i < kNumKeypoints; ++i) {
    if (!gt[i].labeled()) continue;
    const double dx = pred[i].x - gt[i].x, dy = pred[i].y - gt[i].y;
    const double k = kappas.kappa[i];
    sum += std::exp(-(dx * dx + dy * dy) / (2 * area * k * k));
    ++n;
  }
  if (n == 0) throw std::invalid_argument("oks: gt has no labeled keypoint");
  return sum / n;
}

std::vector<double> default_oks_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back(0.5 + 0.05 * i);
  return t;
}

double interpolated_ap(const std::vector<double>& recall, const std::vector<double>& precision) {
  std::vector<double> pr = precision;
  for (int i = static_cast<int>(pr.size()) - 2; i >= 0; --i) pr[i] = std::max(pr[i], pr[i + 1]);
  double sum = 0;
  for (int r = 0; r <= 100; ++r) {
    const double target = r / 100.0;
    const auto it = std::lower_bound(recall.begin(), recall.end(), target);
    if (it != recall.end()) sum += pr[static_cast<std::size_t>(it - recall.begin())];
  }
  return sum / 101.0;
}

namespace {

bool has_labeled(const Keypoints& k) {
  return std::any_of(k.begin(), k.end(), [](const Keypoint& p) { return p.labeled(); });
}

struct ScoredMatch {
  double score;
  bool tp;
  bool ignored;
};

}  // namespace

std::optional<double> keypoint_ap_at(const std::vector<KeypointImage>& images, double threshold,
                                     AreaRange range, const KappaTable& kappas,
                                     int max_detections) {
  std::vector<ScoredMatch> all;
  int n_pos = 0;
  for (const KeypointImage& img : images) {
    // Evaluable gts first, as the matcher relies on that order.
    std::vector<int> order(img.gts.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<bool> ignore(img.gts.size());
    for (std::size_t g = 0; g < img.gts.size(); ++g) {
      const KeypointGt& gt = img.gts[g];
      ignore[g] = gt.ignore || !has_labeled(gt.keypoints) || !range.contains(gt.area);
    }
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return !ignore[a] && ignore[b]; });
    for (std::size_t g = 0; g < img.gts.size(); ++g) n_pos += ignore[g] ? 0 : 1;

    std::vector<int> dets(img.preds.size());
    std::iota(dets.begin(), dets.end(), 0);
    std::stable_sort(dets.begin(), dets.end(),
                     [&](int a, int b) { return img.preds[a].score > img.preds[b].score; });
    if (static_cast<int>(dets.size()) > max_detections) dets.resize(max_detections);

    std::vector<bool> gt_taken(img.gts.size(), false);
    for (int d : dets) {
      const KeypointPrediction& p = img.preds[d];
      double best = std::min(threshold, 1 - 1e-10);
      int match = -1;
      for (int g : order) {
        if (gt_taken[g]) continue;
        if (match > -1 && !ignore[match] && ignore[g]) break;
        if (!has_labeled(img.gts[g].keypoints)) continue;
        const double s = oks(p.keypoints, img.gts[g].keypoints, img.gts[g].area, kappas);
        if (s < best) continue;
        best = s;
        match = g;
      }
      ScoredMatch m{p.score, false, false};
      if (match > -1) {
        gt_taken[match] = true;
        m.tp = true;
        m.ignored = ignore[match];
      } else {
        m.ignored = !range.contains(p.area);
      }
      all.push_back(m);
    }
  }
  if (n_pos == 0) return std::nullopt;
  std::stable_sort(all.begin(), all.end(),
                   [](const ScoredMatch& a, const ScoredMatch& b) { return a.score > b.score; });
  std::vector<double> recall, precision;
  double tp = 0, fp = 0;
  for (const ScoredMatch& m : all) {
    if (m.ignored) continue;
    (m.tp ? tp : fp) += 1;
    recall.push_back(tp / n_pos);
    precision.push_back(tp / (tp + fp));
  }
  return interpolated_ap(recall, precision);
}

ApSuite keypoint_ap(const std::vector<KeypointImage>& images, const KappaTable& kappas) {
  ApSuite s;
  auto mean_over = [&](AreaRange range) -> std::optional<double> {
    double sum = 0;
    for (double t : default_oks_thresholds()) {
      const auto v = keypoint_ap_at(images, t, range, kappas);
      if (!v) return std::nullopt;
      sum += *v;
    }
    return sum / 10.0;
  };
  s.ap = mean_over(kAreaAll);
  s.ap50 = keypoint_ap_at(images, 0.5, kAreaAll, kappas);
  s.ap75 = keypoint_ap_at(images, 0.75, kAreaAll, kappas);
  s.ap_m = mean_over(kAreaMedium);
  s.ap_l = mean_over(kAreaLarge);
  return s;
}

bool in_bin(double v, VisibilityBin bin) {
  switch (bin) {
    case VisibilityBin::kReasonable: return v >= 0.65;
    case VisibilityBin::kHeavyOcclusion: return v >= 0.20 && v < 0.65;
    case VisibilityBin::kReasonableHeavy: return v >= 0.20;
  }
  return false;
}

const char* bin_name(VisibilityBin bin) {
  switch (bin) {
    case VisibilityBin::kReasonable: return "R";
    case VisibilityBin::kHeavyOcclusion: return "HO";
    case VisibilityBin::kReasonableHeavy: return "R+HO";
  }
  return "?";
}

std::array<double, 9> fppi_references() {
  std::array<double, 9> r{};
  for (int i = 0; i < 9; ++i) r[i] = std::pow(10.0, -2.0 + 0.25 * i);
  return r;
}

std::optional<double> miss_rate(const std::vector<BoxImage>& images, VisibilityBin bin,
                                double iou_threshold) {
  struct Scored {
    double score;
    int kind;  // 1 tp, 0 fp, -1 ignored
  };
  std::vector<Scored> all;
  int n_pos = 0;
  for (const BoxImage& img : images) {
    std::vector<bool> ignore(img.gts.size()), taken(img.gts.size(), false);
    for (std::size_t g = 0; g < img.gts.size(); ++g) {
      ignore[g] = !in_bin(img.gts[g].visibility, bin);
      n_pos += ignore[g] ? 0 : 1;
    }
    std::vector<int> order(img.dets.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return img.dets[a].score > img.dets[b].score; });
    for (int d : order) {
      const Box& b = img.dets[d].box;
      int best = -1;
      double best_iou = iou_threshold;
      bool hits_ignore = false;
      for (std::size_t g = 0; g < img.gts.size(); ++g) {
        const double iou = box_iou(b, img.gts[g].box);
        if (iou < iou_threshold) continue;
        if (ignore[g]) {
          hits_ignore = true;
        } else if (!taken[g] && iou >= best_iou) {
          if (best == -1 || iou > best_iou) {
            best = static_cast<int>(g);
            best_iou = iou;
          }
        }
      }
      int kind = 0;
      if (best >= 0) {
        taken[best] = true;
        kind = 1;
      } else if (hits_ignore) {
        kind = -1;
      }
      all.push_back({img.dets[d].score, kind});
    }
  }
  if (n_pos == 0) return std::nullopt;
  std::stable_sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) { return a.score > b.score; });

  // Operating points after each group of equal scores, starting from the
  // empty detection set.
  std::vector<std::pair<double, double>> curve = {{0.0, 1.0}};  // (fppi, miss)
  const double n_img = static_cast<double>(images.size());
  double tp = 0, fp = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i].kind == 1) tp += 1;
    if (all[i].kind == 0) fp += 1;
    if (i + 1 < all.size() && all[i + 1].score == all[i].score) continue;
    curve.push_back({fp / n_img, 1.0 - tp / n_pos});
  }
  double log_sum = 0;
  for (double ref : fppi_references()) {
    double mr = 1.0;
    for (const auto& [fppi, miss] : curve) {
      if (fppi <= ref) mr = std::min(mr, miss);
    }
    log_sum += std::log(std::max(mr, 1e-10));
  }
  return std::exp(log_sum / 9.0);
}

std::optional<double> instance_seg_iou(const std::vector<SegImage>& images, Category category) {
  double sum = 0;
  int n = 0;
  for (const SegImage& img : images) {
    std::vector<int> gts, preds;
    for (std::size_t i = 0; i < img.gts.size(); ++i)
      if (img.gts[i].category == category) gts.push_back(static_cast<int>(i));
    for (std::size_t i = 0; i < img.preds.size(); ++i)
      if (img.preds[i].category == category) preds.push_back(static_cast<int>(i));
    n += static_cast<int>(gts.size());
    std::vector<std::vector<double>> iou(gts.size(), std::vector<double>(preds.size()));
    for (std::size_t a = 0; a < gts.size(); ++a)
      for (std::size_t b = 0; b < preds.size(); ++b)
        iou[a][b] = mask_iou(img.gts[gts[a]].mask, img.preds[preds[b]].mask);
    std::vector<bool> gt_used(gts.size(), false), pred_used(preds.size(), false);
    while (true) {
      double best = 0;
      int ba = -1, bb = -1;
      for (std::size_t a = 0; a < gts.size(); ++a) {
        if (gt_used[a]) continue;
        for (std::size_t b = 0; b < preds.size(); ++b) {
          if (!pred_used[b] && iou[a][b] > best) {
            best = iou[a][b];
            ba = static_cast<int>(a);
            bb = static_cast<int>(b);
          }
        }
      }
      if (ba < 0) break;
      gt_used[ba] = pred_used[bb] = true;
      sum += best;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

}  // namespace occpose::metrics
