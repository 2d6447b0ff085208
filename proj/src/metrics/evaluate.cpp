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

#include "occpose/metrics/evaluate.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

#include "occpose/core/rng.hpp"
#include "occpose/synth/generator.hpp"

namespace occpose::metrics {
namespace {

std::string fmt(std::optional<double> v, int precision = 4) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, *v);
  return buf;
}

std::string exact(std::optional<double> v) {
  if (!v) return "absent";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", *v);
  return buf;
}

std::optional<double> parse_value(const std::string& s) {
  if (s == "absent") return std::nullopt;
  return std::stod(s);
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
}

int percent(double fraction) { return static_cast<int>(std::lround(fraction * 100)); }

void put_suite(std::ostringstream& os, const std::string& prefix, const ApSuite& s) {
  os << prefix << "AP=" << exact(s.ap) << "\n"
     << prefix << "AP50=" << exact(s.ap50) << "\n"
     << prefix << "AP75=" << exact(s.ap75) << "\n"
     << prefix << "AP_M=" << exact(s.ap_m) << "\n"
     << prefix << "AP_L=" << exact(s.ap_l) << "\n";
}

void suite_row(std::ostringstream& os, const std::string& label, const ApSuite& s) {
  os << pad(label, 10) << pad(fmt(s.ap), 8) << pad(fmt(s.ap50), 8) << pad(fmt(s.ap75), 8)
     << pad(fmt(s.ap_m), 8) << fmt(s.ap_l) << "\n";
}

const std::string kSuiteHeader = pad("", 10) + pad("AP", 8) + pad("AP50", 8) + pad("AP75", 8) +
                                 pad("AP_M", 8) + "AP_L\n";

KeypointImage keypoint_image(const PoseEvalItem& item, const std::vector<KeypointPrediction>& preds,
                             int only_instance = -1) {
  KeypointImage img;
  img.preds = preds;
  for (std::size_t i = 0; i < item.gt.size(); ++i) {
    KeypointGt g;
    g.keypoints = item.gt[i];
    g.area = item.sample.instances[i].box.area();
    g.ignore = only_instance >= 0 && static_cast<int>(i) != only_instance;
    img.gts.push_back(g);
  }
  return img;
}

}  // namespace

std::vector<PoseEvalItem> pose_eval_items(const synth::Dataset& d) {
  std::vector<PoseEvalItem> out;
  out.reserve(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    PoseEvalItem item{d.samples[i], {}};
    if (!d.pose_oracle.empty()) {
      item.gt = d.pose_oracle.at(i);
    } else {
      for (const Instance& inst : item.sample.instances) {
        if (!inst.keypoints) throw std::invalid_argument("pose_eval_items: missing keypoints");
        item.gt.push_back(*inst.keypoints);
      }
    }
    if (item.gt.size() != item.sample.instances.size()) {
      throw std::invalid_argument("pose_eval_items: oracle size mismatch");
    }
    out.push_back(std::move(item));
  }
  return out;
}

std::vector<KeypointPrediction> keypoint_predictions(const std::vector<InstancePrediction>& preds) {
  std::vector<KeypointPrediction> out;
  for (const InstancePrediction& p : preds) {
    if (!p.keypoints) continue;
    out.push_back({*p.keypoints, p.detection.score, p.detection.box.area()});
  }
  return out;
}

PosePredictor model_predictor(nn::Model<float>& model, const InferenceOptions& opts) {
  return [&model, opts](const Sample& s) { return keypoint_predictions(predict(model, s, opts)); };
}

std::vector<double> default_sweep_fractions() { return {0.2, 0.3, 0.4, 0.5, 0.6, 0.7}; }

std::vector<SweepPoint> occlusion_sweep(const std::vector<PoseEvalItem>& items,
                                        const PosePredictor& predictor,
                                        const std::vector<double>& fractions,
                                        const std::vector<std::uint64_t>& seeds,
                                        const KappaTable& kappas) {
  std::vector<SweepPoint> out;
  for (double f : fractions) {
    SweepPoint point;
    point.fraction = f;
    for (std::uint64_t seed : seeds) {
      std::vector<KeypointImage> images;
      for (std::size_t k = 0; k < items.size(); ++k) {
        const PoseEvalItem& item = items[k];
        for (std::size_t i = 0; i < item.gt.size(); ++i) {
          if (item.sample.instances[i].visibility_ratio < 1.0) continue;
          PoseEvalItem occluded{{}, item.gt};
          occluded.sample = synth::occlude_instance(item.sample, static_cast<int>(i), f,
                                                    derive_seed(seed, k, i), &occluded.gt[i]);
          images.push_back(keypoint_image(occluded, predictor(occluded.sample), static_cast<int>(i)));
        }
      }
      const auto ap = keypoint_ap(images, kappas).ap;
      point.per_seed.push_back(ap.value_or(0.0));
    }
    double sum = 0;
    for (double v : point.per_seed) sum += v;
    point.mean = point.per_seed.empty() ? 0.0 : sum / point.per_seed.size();
    double ss = 0;
    for (double v : point.per_seed) ss += (v - point.mean) * (v - point.mean);
    point.stddev = point.per_seed.size() > 1 ? std::sqrt(ss / (point.per_seed.size() - 1)) : 0.0;
    out.push_back(std::move(point));
  }
  return out;
}

EvalReport evaluate(nn::Model<float>& model, const synth::Dataset& source_eval,
                    const synth::Dataset* target_eval, const EvalOptions& opts) {
  EvalReport report;
  const PosePredictor predictor = model_predictor(model, opts.inference);
  const auto source_items = pose_eval_items(source_eval);
  {
    std::vector<KeypointImage> images;
    for (const PoseEvalItem& item : source_items) images.push_back(keypoint_image(item, predictor(item.sample)));
    report.keypoint = keypoint_ap(images);
  }
  if (target_eval) {
    std::vector<KeypointImage> kp_images;
    std::vector<BoxImage> box_images;
    std::vector<SegImage> seg_images;
    for (const PoseEvalItem& item : pose_eval_items(*target_eval)) {
      const auto preds = predict(model, item.sample, opts.inference);
      kp_images.push_back(keypoint_image(item, keypoint_predictions(preds)));
      BoxImage b;
      SegImage m;
      for (const Instance& inst : item.sample.instances) {
        b.gts.push_back({inst.box, inst.visibility_ratio});
        m.gts.push_back({inst.mask, inst.category});
      }
      for (const InstancePrediction& p : preds) {
        b.dets.push_back({p.detection.box, p.detection.score});
        m.preds.push_back({p.mask, p.detection.category});
      }
      box_images.push_back(std::move(b));
      seg_images.push_back(std::move(m));
    }
    report.target_keypoint = keypoint_ap(kp_images);
    report.mr_r = miss_rate(box_images, VisibilityBin::kReasonable);
    report.mr_ho = miss_rate(box_images, VisibilityBin::kHeavyOcclusion);
    report.mr_rho = miss_rate(box_images, VisibilityBin::kReasonableHeavy);
    report.iou_person = instance_seg_iou(seg_images, Category::kPerson);
    report.iou_rider = instance_seg_iou(seg_images, Category::kRider);
  }
  if (opts.occlusion_sweep) {
    report.sweep = occlusion_sweep(source_items, predictor, opts.sweep_fractions, opts.sweep_seeds);
  }
  return report;
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << "Keypoint AP\n" << kSuiteHeader;
  suite_row(os, "source", keypoint);
  if (target_keypoint) suite_row(os, "target", *target_keypoint);
  os << "\nMiss rate (target)\n"
     << pad("", 10) << pad("R", 8) << pad("HO", 8) << "R+HO\n"
     << pad("MR", 10) << pad(fmt(mr_r), 8) << pad(fmt(mr_ho), 8) << fmt(mr_rho) << "\n";
  os << "\nInstance IoU (target)\n"
     << pad("", 10) << pad("Person", 8) << "Rider\n"
     << pad("IoU", 10) << pad(fmt(iou_person), 8) << fmt(iou_rider) << "\n";
  if (!sweep.empty()) {
    os << "\nAP by occlusion (source, mean +/- std over "
       << sweep.front().per_seed.size() << " seeds)\n";
    for (const SweepPoint& p : sweep) os << pad(std::to_string(percent(p.fraction)) + "%", 16);
    os << "\n";
    for (const SweepPoint& p : sweep) os << pad(fmt(p.mean) + " +/- " + fmt(p.stddev, 3), 16);
    os << "\n";
  }
  return os.str();
}

std::string EvalReport::to_flat() const {
  std::ostringstream os;
  put_suite(os, "", keypoint);
  if (target_keypoint) put_suite(os, "target.", *target_keypoint);
  os << "MR.R=" << exact(mr_r) << "\n"
     << "MR.HO=" << exact(mr_ho) << "\n"
     << "MR.R+HO=" << exact(mr_rho) << "\n"
     << "IoU.person=" << exact(iou_person) << "\n"
     << "IoU.rider=" << exact(iou_rider) << "\n";
  for (const SweepPoint& p : sweep) {
    const std::string k = "sweep." + std::to_string(percent(p.fraction)) + ".";
    os << k << "fraction=" << exact(p.fraction) << "\n"
       << k << "mean=" << exact(p.mean) << "\n"
       << k << "std=" << exact(p.stddev) << "\n"
       << k << "seeds=";
    for (std::size_t i = 0; i < p.per_seed.size(); ++i) os << (i ? "," : "") << exact(p.per_seed[i]);
    os << "\n";
  }
  return os.str();
}

EvalReport EvalReport::from_flat(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("EvalReport: bad line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const std::string& k) -> std::optional<double> {
    const auto it = kv.find(k);
    return it == kv.end() ? std::nullopt : parse_value(it->second);
  };
  auto suite = [&](const std::string& prefix) {
    return ApSuite{get(prefix + "AP"), get(prefix + "AP50"), get(prefix + "AP75"),
                   get(prefix + "AP_M"), get(prefix + "AP_L")};
  };
  EvalReport r;
  r.keypoint = suite("");
  if (kv.count("target.AP")) r.target_keypoint = suite("target.");
  r.mr_r = get("MR.R");
  r.mr_ho = get("MR.HO");
  r.mr_rho = get("MR.R+HO");
  r.iou_person = get("IoU.person");
  r.iou_rider = get("IoU.rider");
  std::map<double, SweepPoint> points;
  for (const auto& [k, v] : kv) {
    if (!k.starts_with("sweep.") || !k.ends_with(".fraction")) continue;
    const std::string base = k.substr(0, k.size() - 8);
    SweepPoint p;
    p.fraction = std::stod(v);
    p.mean = *get(base + "mean");
    p.stddev = *get(base + "std");
    std::istringstream ss(kv.at(base + "seeds"));
    std::string tok;
    while (std::getline(ss, tok, ',')) p.per_seed.push_back(std::stod(tok));
    points[p.fraction] = p;
  }
  for (auto& [f, p] : points) r.sweep.push_back(p);
  return r;
}

std::string ablation_text(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "Backbone ablation (keypoint AP)\n" << kSuiteHeader;
  for (const AblationRow& r : rows) suite_row(os, r.backbone, r.keypoint);
  bool any_target = false;
  for (const AblationRow& r : rows) any_target |= r.target_keypoint.has_value();
  if (any_target) {
    os << "\nBackbone ablation (target keypoint AP)\n" << kSuiteHeader;
    for (const AblationRow& r : rows)
      if (r.target_keypoint) suite_row(os, r.backbone, *r.target_keypoint);
  }
  return os.str();
}

std::string ablation_flat(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  for (const AblationRow& r : rows) {
    put_suite(os, "ablation." + r.backbone + ".", r.keypoint);
    if (r.target_keypoint) put_suite(os, "ablation." + r.backbone + ".target.", *r.target_keypoint);
  }
  return os.str();
}

}  // namespace occpose::metrics
