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

#include "occpose/cli/commands.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "occpose/cli/plot.hpp"
#include "occpose/core/hash.hpp"
#include "occpose/core/image_io.hpp"
#include "occpose/core/rng.hpp"
#include "occpose/nn/checkpoint.hpp"
#include "occpose/synth/dataset.hpp"
#include "occpose/train/trainer.hpp"

namespace occpose::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct CommandError : std::runtime_error {
  CommandError(int c, const std::string& m) : std::runtime_error(m), code(c) {}
  int code;
};

[[noreturn]] void fail(int code, const std::string& msg) { throw CommandError(code, msg); }

std::string hex(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path().empty() ? fs::path(".") : p.parent_path());
  std::ofstream out(p);
  if (!out) fail(kExitInconsistent, "cannot write " + p.string());
  out << text;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  if (!in) fail(kExitMissingInput, "cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig load_run_config(const CommonArgs& a, RunConfig base = {}) {
  if (!a.config) return base;
  if (!fs::exists(*a.config)) fail(kExitMissingInput, "config not found: " + a.config->string());
  return apply_config(load_config_file(*a.config), base);
}

fs::path data_dir_for(const RunConfig& c, const std::optional<fs::path>& flag) {
  if (flag) return *flag;
  if (!c.data_dir.empty()) return c.data_dir;
  return output_root() / "data";
}

/// Loads one split and checks it against the configured distribution.
synth::Dataset load_split(const fs::path& data_dir, const char* name, const synth::DistributionParams& params) {
  const fs::path dir = data_dir / name;
  if (!fs::exists(dir / "manifest.json")) fail(kExitMissingInput, "missing dataset split: " + dir.string());
  synth::Dataset d;
  try {
    d = synth::read_dataset(dir);
  } catch (const std::exception& e) {
    fail(kExitInconsistent, "unreadable dataset " + dir.string() + ": " + e.what());
  }
  if (d.manifest.params.hash() != params.hash()) {
    fail(kExitInconsistent, "dataset " + dir.string() + " was generated with different parameters");
  }
  return d;
}

std::string model_section(const RunConfig& c) {
  std::istringstream is(to_config_text(c));
  std::string line, out;
  while (std::getline(is, line)) {
    if (line.starts_with("model.")) out += line + "\n";
  }
  return out;
}

RunConfig config_from_checkpoint(const nn::Checkpoint& ckpt) {
  try {
    return apply_config(parse_config_text(ckpt.config_text));
  } catch (const ConfigError& e) {
    fail(kExitInconsistent, std::string("checkpoint carries an unreadable config: ") + e.what());
  }
}

void write_report(const fs::path& dir, const metrics::EvalReport& r) {
  write_text(dir / "report.txt", r.to_text());
  write_text(dir / "report.kv", r.to_flat());
}

metrics::EvalReport run_eval(nn::Model<float>& model, const RunConfig& cfg, const fs::path& data_dir,
                             int limit) {
  synth::Dataset se = load_split(data_dir, "source_eval", cfg.source);
  synth::Dataset te = load_split(data_dir, "target_eval", cfg.target);
  if (limit > 0) {
    for (synth::Dataset* d : {&se, &te}) {
      if (static_cast<int>(d->samples.size()) > limit) d->samples.resize(limit);
      if (static_cast<int>(d->pose_oracle.size()) > limit) d->pose_oracle.resize(limit);
    }
  }
  if (te.pose_oracle.empty()) fail(kExitInconsistent, "target_eval has no pose oracle");
  return metrics::evaluate(model, se, &te, cfg.eval);
}

train::TrainResult train_model(train::Trainer& trainer, const RunConfig& cfg, const fs::path& data_dir,
                               const std::optional<fs::path>& run_dir, bool resume) {
  const synth::Dataset src = load_split(data_dir, "source_train", cfg.source);
  const synth::Dataset tgt = load_split(data_dir, "target_train", cfg.target);
  train::RunOptions opts;
  opts.run_dir = run_dir;
  opts.resume = resume;
  opts.config_text = to_config_text(cfg);
  const long total = cfg.train.total_steps();
  opts.on_step = [total](const train::StepReport& r) {
    if ((r.step + 1) % 500 == 0 || r.step + 1 == total) {
      std::fprintf(stderr, "step %ld/%ld stage %d loss %.4f lr %.5f\n", r.step + 1, total, r.stage,
                   r.loss.total, r.lr);
    }
  };
  return train::run_training(trainer, src, tgt, opts);
}

json manifest_json(const RunConfig& cfg, const fs::path& data_dir) {
  json m;
  m["version"] = kVersion;
  m["seeds"] = {{"data", cfg.data_seed}, {"init", cfg.model.init_seed}, {"train", cfg.train.seed}};
  Fnv1a h;
  h.update(to_config_text(cfg));
  m["config_hash"] = hex(h.digest());
  m["data_dir"] = data_dir.string();
  json ds = json::object();
  for (const char* name : kSplitNames) {
    const fs::path dir = data_dir / name;
    const auto& params = std::string(name).starts_with("source") ? cfg.source : cfg.target;
    const synth::Dataset d = load_split(data_dir, name, params);
    ds[name] = {{"content_hash", hex(d.content_hash())},
                {"params_hash", hex(d.manifest.params_hash())},
                {"samples", d.size()}};
  }
  m["datasets"] = ds;
  return m;
}

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const CommandError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const nn::CheckpointMismatch& e) {
    std::cerr << "error: checkpoint does not match the configuration: " << e.what() << "\n";
    return kExitInconsistent;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInconsistent;
  }
}

}  // namespace

fs::path output_root() {
  const char* env = std::getenv("OCCPOSE_OUT");
  return env && *env ? fs::path(env) : fs::path("occpose_out");
}

int cmd_gen_data(const GenDataArgs& args) {
  return guarded([&] {
    RunConfig cfg = load_run_config(args);
    if (args.seed) cfg.data_seed = *args.seed;
    if (args.n_train) cfg.n_train = *args.n_train;
    if (args.n_eval) cfg.n_eval = *args.n_eval;
    if (cfg.n_train <= 0 || cfg.n_eval <= 0) fail(kExitUsage, "--n-train and --n-eval must be positive");
    cfg.validate();
    const fs::path out = args.out ? *args.out : data_dir_for(cfg, std::nullopt);
    if (fs::exists(out) && !fs::is_empty(out)) {
      if (!args.force) fail(kExitInconsistent, out.string() + " is not empty (use --force)");
      for (const char* name : kSplitNames) fs::remove_all(out / name);
    }
    fs::create_directories(out);
    for (int k = 0; k < 4; ++k) {
      const bool source = k < 2;
      const bool eval = k % 2 == 1;
      const auto& params = source ? cfg.source : cfg.target;
      const synth::Dataset d = synth::build_dataset(params, eval ? cfg.n_eval : cfg.n_train,
                                                    derive_seed(cfg.data_seed, k + 1), !source && eval);
      synth::write_dataset(out / kSplitNames[k], d);
      std::printf("%-13s %4zu samples  hash %s\n", kSplitNames[k], d.size(), hex(d.content_hash()).c_str());
    }
    cfg.data_dir = out.string();
    write_text(out / "data.cfg", to_config_text(cfg));
    return kExitOk;
  });
}

int cmd_train(const TrainArgs& args) {
  return guarded([&] {
    RunConfig cfg = load_run_config(args);
    if (args.seed) cfg.model.init_seed = cfg.train.seed = *args.seed;
    if (args.beta) cfg.train.weights.beta = *args.beta;
    if (args.stage2_steps) cfg.train.stage2_steps = *args.stage2_steps;
    int eval_limit = 0;
    if (args.smoke) {
      cfg.train.stage1_steps = std::min(cfg.train.stage1_steps, 50);
      cfg.train.checkpoint_every = 0;
      cfg.eval.occlusion_sweep = false;
      eval_limit = 10;
    }
    cfg.validate();
    const fs::path data_dir = data_dir_for(cfg, args.data);
    const fs::path run_dir = args.out ? *args.out : cfg.out_dir.empty() ? output_root() / "run" : fs::path(cfg.out_dir);
    if (!args.resume && train::latest_checkpoint(run_dir)) {
      fail(kExitInconsistent, run_dir.string() + " already holds checkpoints (use --resume)");
    }
    if (args.resume && fs::exists(run_dir / "config.cfg") &&
        read_text(run_dir / "config.cfg") != to_config_text(cfg)) {
      fail(kExitInconsistent, "--resume with a configuration that differs from the run's snapshot");
    }
    cfg.data_dir = data_dir.string();
    cfg.out_dir = run_dir.string();
    fs::create_directories(run_dir);
    write_text(run_dir / "config.cfg", to_config_text(cfg));
    write_text(run_dir / "manifest.json", manifest_json(cfg, data_dir).dump(2) + "\n");
    if (cfg.train.weights.beta == 0) {
      std::fprintf(stderr, "beta = 0: domain classifier frozen, no adversarial update\n");
    }

    train::Trainer trainer(cfg.model, cfg.train);
    const auto result = train_model(trainer, cfg, data_dir, run_dir, args.resume);
    std::printf("parameter hash %s after %ld steps\n", hex(result.parameter_hash).c_str(), result.steps_done);
    const auto report = run_eval(trainer.model(), cfg, data_dir, eval_limit);
    write_report(run_dir, report);
    std::printf("%s", report.to_text().c_str());
    return kExitOk;
  });
}

int cmd_eval(const EvalArgs& args) {
  return guarded([&] {
    if (args.ablate_backbone) {
      const fs::path run_cfg = args.run ? *args.run / "config.cfg" : fs::path();
      RunConfig base;
      if (!args.config && !run_cfg.empty() && fs::exists(run_cfg)) {
        base = apply_config(load_config_file(run_cfg));
      }
      RunConfig cfg = load_run_config(args, base);
      if (args.seed) cfg.model.init_seed = cfg.train.seed = *args.seed;
      cfg.eval.occlusion_sweep = false;
      cfg.validate();
      const fs::path data_dir = data_dir_for(cfg, args.data);
      const fs::path out = args.out ? *args.out : output_root() / "ablation";
      std::vector<metrics::AblationRow> rows;
      for (auto size : {nn::BackboneSize::kSmall, nn::BackboneSize::kMedium, nn::BackboneSize::kLarge}) {
        RunConfig c = cfg;
        c.model.backbone_size = size;
        const std::string name(nn::to_string(size));
        std::fprintf(stderr, "ablation: training %s backbone\n", name.c_str());
        train::Trainer trainer(c.model, c.train);
        train_model(trainer, c, data_dir, std::nullopt, false);
        const auto report = run_eval(trainer.model(), c, data_dir, 0);
        rows.push_back({name, report.keypoint, report.target_keypoint});
      }
      write_text(out / "ablation.txt", metrics::ablation_text(rows));
      write_text(out / "ablation.kv", metrics::ablation_flat(rows));
      std::printf("%s", metrics::ablation_text(rows).c_str());
      return kExitOk;
    }

    const fs::path run_dir = args.run ? *args.run : output_root() / "run";
    std::optional<fs::path> ckpt_path = args.checkpoint;
    if (!ckpt_path) ckpt_path = train::latest_checkpoint(run_dir);
    if (!ckpt_path || !fs::exists(*ckpt_path)) fail(kExitMissingInput, "no checkpoint found");
    const nn::Checkpoint ckpt = nn::read_checkpoint(*ckpt_path);
    const RunConfig ckpt_cfg = config_from_checkpoint(ckpt);
    RunConfig cfg = load_run_config(args, ckpt_cfg);
    if (model_section(cfg) != model_section(ckpt_cfg)) {
      fail(kExitInconsistent, "model settings differ from the checkpoint's configuration");
    }
    if (args.seed) cfg.eval.sweep_seeds = {*args.seed, *args.seed + 1, *args.seed + 2};
    if (args.occlusion_sweep) cfg.eval.occlusion_sweep = true;
    cfg.validate();
    nn::Model<float> model(cfg.model);
    nn::restore_checkpoint(ckpt, model, nullptr);
    const fs::path data_dir = data_dir_for(cfg, args.data);
    const auto report = run_eval(model, cfg, data_dir, 0);
    const fs::path out = args.out ? *args.out : run_dir / "eval";
    write_report(out, report);
    std::printf("%s", report.to_text().c_str());
    return kExitOk;
  });
}

int cmd_plot(const PlotArgs& args) {
  return guarded([&] {
    const fs::path run_dir = args.run ? *args.run : output_root() / "run";
    const fs::path log = run_dir / "steps.jsonl";
    if (!fs::exists(log)) fail(kExitMissingInput, "missing training log " + log.string());
    const fs::path out = args.out ? *args.out : run_dir / "plots";
    fs::create_directories(out);

    std::vector<long> steps;
    std::vector<double> losses;
    {
      std::istringstream is(read_text(log));
      std::string line;
      while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto r = train::step_report_from_json(line);
        steps.push_back(r.step);
        losses.push_back(r.loss.total);
      }
    }
    write_text(out / "loss.svg", loss_curve_svg(steps, losses));
    std::printf("loss.svg: %zu steps\n", steps.size());

    std::optional<metrics::EvalReport> report;
    for (const fs::path& p : {run_dir / "eval" / "report.kv", run_dir / "report.kv"}) {
      if (!fs::exists(p)) continue;
      const auto r = metrics::EvalReport::from_flat(read_text(p));
      if (!r.sweep.empty()) {
        report = r;
        break;
      }
    }
    if (report) {
      write_text(out / "occlusion.svg", occlusion_svg(report->sweep));
      std::printf("occlusion.svg: %zu fractions\n", report->sweep.size());
    } else {
      std::fprintf(stderr, "no occlusion sweep in %s; run eval --occlusion-sweep first\n", run_dir.string().c_str());
    }

    if (args.overlays > 0) {
      const auto ckpt_path = train::latest_checkpoint(run_dir);
      if (!ckpt_path) fail(kExitMissingInput, "no checkpoint in " + run_dir.string());
      const nn::Checkpoint ckpt = nn::read_checkpoint(*ckpt_path);
      RunConfig cfg = load_run_config(args, config_from_checkpoint(ckpt));
      nn::Model<float> model(cfg.model);
      nn::restore_checkpoint(ckpt, model, nullptr);
      const fs::path data_dir = data_dir_for(cfg, args.data);
      for (const auto& [name, params] : {std::pair{"source_eval", cfg.source}, std::pair{"target_eval", cfg.target}}) {
        const synth::Dataset d = load_split(data_dir, name, params);
        for (int i = 0; i < std::min<int>(args.overlays, static_cast<int>(d.size())); ++i) {
          const Sample& s = d.samples[i];
          const Image img = draw_overlay(s.image, metrics::predict(model, s, cfg.eval.inference));
          write_png(out / ("overlay_" + std::string(name) + "_" + std::to_string(i) + ".png"), img);
        }
      }
      std::printf("overlays: %d per eval split\n", args.overlays);
    }
    return kExitOk;
  });
}

}  // namespace occpose::cli
