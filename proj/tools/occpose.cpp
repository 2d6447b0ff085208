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

#include <CLI11.hpp>

#include "occpose/cli/commands.hpp"

namespace {

using occpose::cli::CommonArgs;

void add_common(CLI::App* app, CommonArgs& a) {
  app->add_option("--config", a.config, "Config file (key = value, # comments, include)");
  app->add_option("--seed", a.seed, "Seed override");
  app->add_option("--out", a.out, "Output directory (default under $OCCPOSE_OUT)");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace occpose::cli;
  CLI::App app{"Occluded pedestrian pose estimation at desk scale"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate source/target train and eval splits");
  add_common(gen_cmd, gen);
  gen_cmd->add_option("--n-train", gen.n_train, "Samples per train split");
  gen_cmd->add_option("--n-eval", gen.n_eval, "Samples per eval split");
  gen_cmd->add_flag("--force", gen.force, "Overwrite existing splits");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Two-stage training followed by evaluation");
  add_common(train_cmd, tr);
  train_cmd->add_option("--data", tr.data, "Dataset directory");
  train_cmd->add_option("--beta", tr.beta, "Domain-classification loss weight");
  train_cmd->add_option("--stage2-steps", tr.stage2_steps, "Stage-2 steps");
  train_cmd->add_flag("--smoke", tr.smoke, "Short stage 1, no periodic checkpoints, small eval");
  train_cmd->add_flag("--resume", tr.resume, "Continue from the latest checkpoint");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(eval_cmd, ev);
  eval_cmd->add_option("--data", ev.data, "Dataset directory");
  eval_cmd->add_option("--run", ev.run, "Run directory");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint file (default: latest in run)");
  eval_cmd->add_flag("--occlusion-sweep", ev.occlusion_sweep, "Add the AP-by-occlusion sweep");
  eval_cmd->add_flag("--ablate-backbone", ev.ablate_backbone, "Train and evaluate every backbone size");

  PlotArgs pl;
  auto* plot_cmd = app.add_subcommand("plot", "Loss curve, occlusion curve and overlays");
  add_common(plot_cmd, pl);
  plot_cmd->add_option("--data", pl.data, "Dataset directory");
  plot_cmd->add_option("--run", pl.run, "Run directory");
  plot_cmd->add_option("--overlays", pl.overlays, "Overlay images per eval split");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  if (*gen_cmd) return cmd_gen_data(gen);
  if (*train_cmd) return cmd_train(tr);
  if (*eval_cmd) return cmd_eval(ev);
  return cmd_plot(pl);
}
