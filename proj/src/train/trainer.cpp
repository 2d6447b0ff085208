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

#include "occpose/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "occpose/core/heatmap.hpp"
#include "occpose/nn/roi.hpp"
#include "occpose/train/augment.hpp"

namespace occpose::train {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using nn::FeatureMap;

// Stream tags for derive_seed.
constexpr std::uint64_t kTagAugment = 0xa1;
constexpr std::uint64_t kTagBlock = 0xb1;
constexpr std::uint64_t kTagStage1Source = 0xc1;
constexpr std::uint64_t kTagStage1Target = 0xc2;
constexpr std::uint64_t kTagStage2Source = 0xd1;
constexpr std::uint64_t kTagStage2Target = 0xd2;

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::set<std::string> stage1_components(Domain d) {
  return {std::string(nn::encoder_name(d)), std::string(nn::detector_name(d)),
          std::string(nn::segmenter_name(d))};
}

std::set<std::string> stage2_components(Domain d, const losses::LossWeights& w) {
  std::set<std::string> out = stage1_components(d);
  const bool pose = d == Domain::kSource && w.gamma > 0;
  if (w.beta > 0) out.insert("dom_cls");
  if (w.beta > 0 || pose) out.insert("pose_enc");
  if (pose) out.insert("pose_dec");
  return out;
}

nn::BlockMask<float>::Rect curriculum_block(double fraction, int roi, std::uint64_t seed) {
  const int cells = static_cast<int>(std::lround(fraction * roi * roi));
  if (cells <= 0) return {};
  Rng rng(seed);
  const int min_h = (cells + roi - 1) / roi;
  const int bh = rng.uniform_int(min_h, std::min(roi, cells));
  const int bw = std::clamp(static_cast<int>(std::lround(static_cast<double>(cells) / bh)), 1, roi);
  const int y0 = rng.uniform_int(0, roi - bh), x0 = rng.uniform_int(0, roi - bw);
  return {y0, x0, y0 + bh, x0 + bw};
}

int stream_index(std::uint64_t seed, std::uint64_t stream, long k, int n) {
  if (n <= 0) throw std::invalid_argument("stream_index: empty stream");
  const auto epoch = static_cast<std::uint64_t>(k / n);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(seed, stream, epoch));
  for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(0, i)]);
  return perm[k % n];
}

std::string to_json_line(const StepReport& r, const losses::LossWeights& w) {
  json j;
  j["step"] = r.step;
  j["stage"] = r.stage;
  j["domain"] = std::string(to_string(r.domain));
  j["det_c"] = r.loss.det_c;
  j["det_m"] = r.loss.det_m;
  j["seg_c"] = r.loss.seg_c;
  j["seg_m"] = r.loss.seg_m;
  j["dc"] = r.loss.dc;
  j["pe"] = r.loss.pe;
  j["total"] = r.loss.total;
  j["weights"] = {{"alpha", w.alpha}, {"beta", w.beta}, {"gamma", w.gamma}};
  j["lr"] = r.lr;
  j["mask_fraction"] = r.mask_fraction;
  j["instances"] = r.instances;
  j["skipped"] = r.skipped;
  j["no_positive"] = r.no_positive;
  j["updated"] = r.updated;
  j["wall_ms"] = r.wall_ms;
  return j.dump();
}

StepReport step_report_from_json(const std::string& line) {
  const json j = json::parse(line);
  StepReport r;
  r.step = j.at("step").get<long>();
  r.stage = j.at("stage").get<int>();
  r.domain = domain_from_string(j.at("domain").get<std::string>());
  r.loss.det_c = j.at("det_c").get<double>();
  r.loss.det_m = j.at("det_m").get<double>();
  r.loss.seg_c = j.at("seg_c").get<double>();
  r.loss.seg_m = j.at("seg_m").get<double>();
  r.loss.dc = j.at("dc").get<double>();
  r.loss.pe = j.at("pe").get<double>();
  r.loss.total = j.at("total").get<double>();
  r.lr = j.at("lr").get<double>();
  r.mask_fraction = j.at("mask_fraction").get<double>();
  r.instances = j.at("instances").get<int>();
  r.skipped = j.at("skipped").get<bool>();
  r.no_positive = j.value("no_positive", false);
  r.updated = j.at("updated").get<std::vector<std::string>>();
  r.wall_ms = j.value("wall_ms", 0.0);
  return r;
}

Trainer::Trainer(const ModelConfig& model_cfg, const TrainConfig& cfg)
    : model_cfg_(model_cfg), cfg_(cfg), model_(model_cfg), opt_(cfg.momentum) {
  cfg.validate();
}

Sample Trainer::training_view(const Sample& s, long global_step) const {
  return augment(s, derive_seed(cfg_.seed, kTagAugment, static_cast<std::uint64_t>(global_step)),
                 cfg_.augment);
}

StepReport Trainer::pretrain_step(const Sample& raw, long local_step, long global_step) {
  const auto t0 = std::chrono::steady_clock::now();
  StepReport r;
  r.step = global_step;
  r.stage = 1;
  r.domain = raw.domain;
  r.lr = lr_schedule(local_step, cfg_);
  const Sample s = training_view(raw, global_step);

  model_.zero_grad();
  const auto pass = model_.mtl_forward(s.domain, nn::from_image<float>(s.image));
  FeatureMap<float> d_det;
  const auto det = losses::det_loss(pass.det, losses::detection_targets(s, pass.det.stride), &d_det);
  const auto seg_target = losses::segmentation_targets<float>(s);
  const double seg = losses::seg_loss<float>(pass.seg_prob.data, seg_target, nullptr);
  FeatureMap<float> d_seg(pass.seg_prob.channels, pass.seg_prob.height, pass.seg_prob.width);
  d_seg.data = losses::seg_logit_grad<float>(pass.seg_prob.data, seg_target) *
               static_cast<float>(cfg_.weights.alpha);
  model_.mtl_backward(pass, d_det, d_seg, nullptr);

  const auto components = stage1_components(s.domain);
  opt_.step(model_, r.lr, components);
  r.updated.assign(components.begin(), components.end());
  r.no_positive = det.no_positive;
  if (s.domain == Domain::kSource) {
    r.loss.det_m = det.total;
    r.loss.seg_m = seg;
  } else {
    r.loss.det_c = det.total;
    r.loss.seg_c = seg;
  }
  r.loss = losses::with_total(r.loss, cfg_.weights);
  r.wall_ms = elapsed_ms(t0);
  return r;
}

StepReport Trainer::stage2_step(const Sample& raw, long local_step, long global_step) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& w = cfg_.weights;
  StepReport r;
  r.step = global_step;
  r.stage = 2;
  r.domain = raw.domain;
  r.lr = lr_schedule(local_step, cfg_);
  r.mask_fraction = mask_schedule(local_step, cfg_.stage2_steps, cfg_.mask_start, cfg_.mask_end);
  if (raw.instances.empty()) {
    r.skipped = true;
    r.wall_ms = elapsed_ms(t0);
    return r;
  }
  const Sample s = training_view(raw, global_step);
  const Domain d = s.domain;
  const bool source = d == Domain::kSource;

  model_.zero_grad();
  const auto pass = model_.mtl_forward(d, nn::from_image<float>(s.image));
  FeatureMap<float> d_det;
  const auto det = losses::det_loss(pass.det, losses::detection_targets(s, pass.det.stride), &d_det);
  const auto seg_target = losses::segmentation_targets<float>(s);
  const double seg = losses::seg_loss<float>(pass.seg_prob.data, seg_target, nullptr);
  FeatureMap<float> d_seg(pass.seg_prob.channels, pass.seg_prob.height, pass.seg_prob.width);
  d_seg.data = losses::seg_logit_grad<float>(pass.seg_prob.data, seg_target) * static_cast<float>(w.alpha);

  // Pose branch, one instance at a time.
  const FeatureMap<float>& p0 = pass.pyramid[0];
  FeatureMap<float> d_p0(p0.channels, p0.height, p0.width);
  std::vector<int> usable;
  for (int i = 0; i < static_cast<int>(s.instances.size()); ++i) {
    if (nn::roi_feasible(s.instances[i].box, nn::ModelConfig::kFinestStride)) usable.push_back(i);
  }
  const bool want_pose = source;
  const bool train_pose = source && w.gamma > 0;
  const bool train_dc = w.beta > 0;
  double pe_sum = 0, dc_sum = 0;
  int pe_count = 0;
  const int roi = model_.config().roi_size, hm = model_.config().heatmap_size();
  for (int i : usable) {
    const Instance& inst = s.instances[i];
    Mask roi_mask = nn::predicted_instance_mask(pass.seg_prob, inst.category, inst.box);
    const auto gt_count = mask_count(inst.mask);
    const auto overlap = mask_count((roi_mask.array() * inst.mask.array()).matrix());
    if (static_cast<double>(overlap) < cfg_.min_mask_overlap * static_cast<double>(gt_count)) {
      roi_mask = inst.mask;
    }
    const auto block = curriculum_block(
        r.mask_fraction, roi,
        derive_seed(cfg_.seed, kTagBlock, derive_seed(static_cast<std::uint64_t>(global_step), i)));
    model_.begin_instance(p0, inst.box, &roi_mask, block);
    const float scale = 1.0f / static_cast<float>(usable.size());
    if (want_pose && inst.keypoints) {
      const FeatureMap<float> pred = model_.pose_heatmaps();
      const auto target = render_heatmaps<float>(*inst.keypoints, hm, hm,
                                                 nn::roi_heatmap_frame(inst.box, model_.config()),
                                                 cfg_.heatmap_sigma);
      nn::Matrix<float> g;
      const auto pl = losses::pose_loss<float>(pred.data, target.data, *inst.keypoints, &g);
      if (!pl.no_labeled) {
        pe_sum += pl.value;
        ++pe_count;
        if (train_pose) {
          FeatureMap<float> dh(pred.channels, pred.height, pred.width);
          dh.data = g * (static_cast<float>(w.gamma) * scale);
          model_.pose_backward(dh);
        }
      }
    }
    const float p = model_.domain_probability();
    dc_sum += losses::domain_loss<float>(p, d, nullptr);
    if (train_dc) {
      model_.domain_backward(losses::domain_logit_grad(p, d) * static_cast<float>(w.beta) * scale);
    }
    if (train_pose || train_dc) d_p0 += model_.end_instance();
  }
  r.instances = static_cast<int>(usable.size());
  model_.mtl_backward(pass, d_det, d_seg,
                      (train_pose || train_dc) && !usable.empty() ? &d_p0 : nullptr);

  const auto components = stage2_components(d, w);
  opt_.step(model_, r.lr, components);
  if (components.count("pose_enc")) model_.pose_encoder().project();
  r.updated.assign(components.begin(), components.end());
  r.no_positive = det.no_positive;
  if (source) {
    r.loss.det_m = det.total;
    r.loss.seg_m = seg;
    r.loss.pe = pe_count ? pe_sum / static_cast<double>(usable.size()) : 0.0;
  } else {
    r.loss.det_c = det.total;
    r.loss.seg_c = seg;
  }
  r.loss.dc = usable.empty() ? 0.0 : dc_sum / static_cast<double>(usable.size());
  r.loss = losses::with_total(r.loss, w);
  r.wall_ms = elapsed_ms(t0);
  return r;
}

std::vector<StepReport> Trainer::pretrain_mtl(const synth::Dataset& data, long first_global_step) {
  if (data.samples.empty()) throw std::invalid_argument("pretrain_mtl: empty dataset");
  const Domain d = data.samples.front().domain;
  const auto tag = d == Domain::kSource ? kTagStage1Source : kTagStage1Target;
  std::vector<StepReport> out;
  for (long k = 0; k < cfg_.stage1_steps; ++k) {
    const Sample& s = data.samples[stream_index(cfg_.seed, tag, k, static_cast<int>(data.size()))];
    if (s.domain != d) throw std::invalid_argument("pretrain_mtl: mixed-domain dataset");
    out.push_back(pretrain_step(s, k, first_global_step + k));
  }
  return out;
}

std::optional<fs::path> latest_checkpoint(const fs::path& run_dir) {
  const fs::path dir = run_dir / "checkpoints";
  if (!fs::is_directory(dir)) return std::nullopt;
  std::optional<fs::path> best;
  long best_step = -1;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (!name.starts_with("step_") || e.path().extension() != ".ckpt") continue;
    const long step = std::stol(name.substr(5));
    if (step > best_step) {
      best_step = step;
      best = e.path();
    }
  }
  return best;
}

TrainResult run_training(Trainer& trainer, const synth::Dataset& source,
                         const synth::Dataset& target, const RunOptions& opts) {
  const TrainConfig& cfg = trainer.config();
  if (source.samples.empty() || target.samples.empty()) {
    throw std::invalid_argument("run_training: both datasets must be non-empty");
  }
  for (const Sample& s : source.samples)
    if (s.domain != Domain::kSource) throw std::invalid_argument("run_training: source set holds target samples");
  for (const Sample& s : target.samples)
    if (s.domain != Domain::kTarget) throw std::invalid_argument("run_training: target set holds source samples");

  long start = 0;
  std::optional<fs::path> ckpt_dir;
  if (opts.run_dir) {
    ckpt_dir = *opts.run_dir / "checkpoints";
    fs::create_directories(*ckpt_dir);
    if (opts.resume) {
      if (auto latest = latest_checkpoint(*opts.run_dir)) {
        const auto ckpt = nn::read_checkpoint(*latest);
        nn::restore_checkpoint(ckpt, trainer.model(), &trainer.optimizer());
        start = static_cast<long>(ckpt.step);
      }
    }
  }

  // Keep log lines of steps that precede the resume point.
  std::ofstream log;
  if (opts.run_dir) {
    const fs::path log_path = *opts.run_dir / "steps.jsonl";
    std::vector<std::string> kept;
    if (start > 0 && fs::exists(log_path)) {
      std::ifstream in(log_path);
      for (std::string line; std::getline(in, line);) {
        if (!line.empty() && json::parse(line).at("step").get<long>() < start) kept.push_back(line);
      }
    }
    log.open(log_path, std::ios::trunc);
    for (const auto& line : kept) log << line << '\n';
  }

  const long s1 = cfg.stage1_steps, total = cfg.total_steps();
  const long end = opts.stop_after ? std::min(total, *opts.stop_after) : total;
  const int n_src = static_cast<int>(source.size()), n_tgt = static_cast<int>(target.size());
  TrainResult result;
  auto save = [&](long step_count) {
    if (!ckpt_dir) return;
    char name[48];
    std::snprintf(name, sizeof(name), "step_%08ld.ckpt", step_count);
    const fs::path path = *ckpt_dir / name;
    nn::write_checkpoint(path, nn::make_checkpoint(trainer.model(), &trainer.optimizer(),
                                                   static_cast<std::uint64_t>(step_count),
                                                   opts.config_text));
    result.final_checkpoint = path;
  };

  for (long g = start; g < end; ++g) {
    StepReport r;
    if (g < s1) {
      r = trainer.pretrain_step(source.samples[stream_index(cfg.seed, kTagStage1Source, g, n_src)], g, g);
    } else if (g < 2 * s1) {
      const long k = g - s1;
      r = trainer.pretrain_step(target.samples[stream_index(cfg.seed, kTagStage1Target, k, n_tgt)], k, g);
    } else {
      const long k = g - 2 * s1;
      const bool src = k % 2 == 0;
      const Sample& s = src ? source.samples[stream_index(cfg.seed, kTagStage2Source, k / 2, n_src)]
                            : target.samples[stream_index(cfg.seed, kTagStage2Target, k / 2, n_tgt)];
      r = trainer.stage2_step(s, k, g);
    }
    if (log.is_open()) log << to_json_line(r, cfg.weights) << '\n' << std::flush;
    if (opts.on_step) opts.on_step(r);
    result.history.push_back(std::move(r));
    const long done = g + 1;
    if (cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 && done != total) save(done);
  }
  result.steps_done = end;
  if (end == total) save(total);
  result.parameter_hash = trainer.model().parameter_hash();
  return result;
}

}  // namespace occpose::train
