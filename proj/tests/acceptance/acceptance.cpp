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

// End-to-end acceptance checks. Prints one PASS/FAIL line per check and
// exits non-zero when any check fails.
//
//   acceptance [out_dir] [--only name,name,...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "../oracles.hpp"
#include "../test_util.hpp"
#include "occpose/cli/commands.hpp"
#include "occpose/cli/run_config.hpp"
#include "occpose/losses/losses.hpp"
#include "occpose/metrics/evaluate.hpp"
#include "occpose/synth/dataset.hpp"
#include "occpose/synth/generator.hpp"
#include "occpose/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace occpose;

namespace {

// Tolerances and thresholds.
constexpr double kLossRelTol = 1e-12;
constexpr double kFdRelTol = 1e-4;
constexpr double kFdFloor = 1e-6;
constexpr double kMetricTol = 1e-9;
constexpr double kOccluderTol = 0.02;
constexpr double kTrendSlack = 0.01;
constexpr int kRandomCases = 1000;
constexpr int kFdCoordinates = 100;
constexpr int kAsymmetrySteps = 200;
constexpr int kOccluderInstances = 100;
constexpr double kTrendBudgetMin = 45, kAdaptationBudgetMin = 90, kAblationBudgetMin = 60;
const std::vector<std::uint64_t> kSeeds = {1, 2, 3};

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;
double minutes_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count() / 60.0;
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}
std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2e", v);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Context {
  fs::path out;
  fs::path config = OCCPOSE_REFERENCE_CONFIG;
  fs::path data;
  cli::RunConfig reference;

  // One full reference run per (beta, seed).
  struct Run {
    int exit_code = -1;
    double minutes = 0;
    metrics::EvalReport report;
    fs::path dir;
  };
  std::map<std::pair<double, std::uint64_t>, Run> runs;
  double run_minutes = 0;

  const Run& run(double beta, std::uint64_t seed) {
    const auto key = std::make_pair(beta, seed);
    if (auto it = runs.find(key); it != runs.end()) return it->second;
    Run r;
    r.dir = out / "runs" / ("beta" + fmt(beta, 1) + "_seed" + std::to_string(seed));
    fs::remove_all(r.dir);
    cli::TrainArgs a;
    a.config = config;
    a.data = data;
    a.out = r.dir;
    a.seed = seed;
    a.beta = beta;
    const auto t0 = Clock::now();
    std::fprintf(stderr, "[acceptance] reference run beta=%g seed=%llu\n", beta,
                 static_cast<unsigned long long>(seed));
    r.exit_code = cli::cmd_train(a);
    r.minutes = minutes_since(t0);
    run_minutes += r.minutes;
    if (r.exit_code == 0) r.report = metrics::EvalReport::from_flat(read_file(r.dir / "report.kv"));
    return runs[key] = r;
  }
};

// --- checks ----------------------------------------------------------------

Outcome loss_combination(Context&) {
  Rng rng(2024);
  const losses::LossWeights defaults;
  double worst = 0;
  for (int t = 0; t < kRandomCases; ++t) {
    losses::LossBreakdown p;
    for (double* v : {&p.det_c, &p.det_m, &p.seg_c, &p.seg_m, &p.dc, &p.pe}) *v = rng.uniform(0, 10);
    losses::LossWeights w{rng.uniform(0, 2), rng.uniform(0, 2), rng.uniform(0, 2)};
    const long double oracle = static_cast<long double>(p.det_c) + p.det_m +
                               static_cast<long double>(w.alpha) * (static_cast<long double>(p.seg_c) + p.seg_m) +
                               static_cast<long double>(w.beta) * p.dc + static_cast<long double>(w.gamma) * p.pe;
    worst = std::max(worst, testing::rel_err(losses::total_loss(p, w), static_cast<double>(oracle), 1e-300));
  }
  const losses::LossBreakdown ones{1, 1, 1, 1, 1, 1};
  const double unit = losses::total_loss(ones, defaults);
  const bool pass = worst <= kLossRelTol && unit == 5.0;
  return {pass, "max rel err " + sci(worst) + " over " + std::to_string(kRandomCases) +
                    " tuples; all-ones total " + fmt(unit, 12)};
}

Outcome asymmetric_update(Context& ctx) {
  const synth::Dataset src = synth::read_dataset(ctx.data / "source_train");
  const synth::Dataset tgt = synth::read_dataset(ctx.data / "target_train");
  train::TrainConfig tc = ctx.reference.train;
  tc.stage1_steps = 0;
  tc.stage2_steps = kAsymmetrySteps;
  tc.checkpoint_every = 0;
  train::Trainer trainer(ctx.reference.model, tc);
  std::uint64_t prev = trainer.model().component_hash("pose_dec");
  int src_steps = 0, src_changed = 0, tgt_steps = 0, tgt_changed = 0, skipped = 0;
  train::RunOptions opts;
  opts.on_step = [&](const train::StepReport& r) {
    const std::uint64_t now = trainer.model().component_hash("pose_dec");
    if (r.skipped) {
      ++skipped;
    } else if (r.domain == Domain::kSource) {
      ++src_steps;
      src_changed += now != prev;
    } else {
      ++tgt_steps;
      tgt_changed += now != prev;
    }
    prev = now;
  };
  train::run_training(trainer, src, tgt, opts);
  const bool pass = src_steps > 0 && tgt_steps > 0 && src_changed == src_steps && tgt_changed == 0;
  return {pass, "pose decoder changed on " + std::to_string(src_changed) + "/" + std::to_string(src_steps) +
                    " source steps and " + std::to_string(tgt_changed) + "/" + std::to_string(tgt_steps) +
                    " target steps (" + std::to_string(skipped) + " skipped)"};
}

Outcome gradient_reversal(Context& ctx) {
  using nn::FeatureMap;
  nn::ModelConfig mc = ctx.reference.model;
  Rng rng(77);
  bool exact = true;
  double worst_fd = 0;
  int fd_checked = 0, kinks = 0;
  for (double lambda : {mc.grl_lambda, 0.5}) {
    mc.grl_lambda = lambda;
    nn::Model<double> model(mc);
    model.visit_params([&](std::string_view c, const std::string&, nn::Param<double>& p) {
      if (c != "dom_cls") return;
      for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] += 0.3 * rng.normal();
    });
    const FeatureMap<double> p0 = testing::random_map<double>(rng, mc.fpn_channels, 32, 40);
    const Box box{10, 6, 46, 58};
    const Domain domain = Domain::kTarget;

    auto grads = [&](bool reversed) {
      model.grad_reverse().set_enabled(reversed);
      model.zero_grad();
      model.begin_instance(p0, box, nullptr);
      const double p = model.domain_probability();
      model.domain_backward(losses::domain_logit_grad(p, domain));
      const FeatureMap<double> d_p0 = model.end_instance();
      std::vector<double> g;
      model.visit_params([&](std::string_view c, const std::string&, nn::Param<double>& prm) {
        if (c == "pose_enc") g.insert(g.end(), prm.grad.data(), prm.grad.data() + prm.grad.size());
      });
      g.insert(g.end(), d_p0.data.data(), d_p0.data.data() + d_p0.data.size());
      return g;
    };
    const std::vector<double> rev = grads(true), plain = grads(false);
    for (std::size_t i = 0; i < rev.size(); ++i) exact = exact && rev[i] == -lambda * plain[i];

    // Central differences of the plain objective on pose-encoder weights.
    model.grad_reverse().set_enabled(true);
    std::vector<double*> coords;
    model.visit_params([&](std::string_view c, const std::string&, nn::Param<double>& prm) {
      if (c == "pose_enc")
        for (Eigen::Index i = 0; i < prm.value.size(); ++i) coords.push_back(prm.value.data() + i);
    });
    auto objective = [&] {
      model.begin_instance(p0, box, nullptr);
      const double p = model.domain_probability();
      model.end_instance();
      return losses::domain_loss(p, domain, static_cast<double*>(nullptr));
    };
    // Coordinates whose one-sided differences disagree sit on an activation
    // kink within h, where no derivative exists; those are drawn again.
    int drawn = 0;
    while (drawn < kFdCoordinates / 2) {
      const std::size_t i = rng.next_u64() % coords.size();
      const double h = 1e-6, x = *coords[i], f0 = objective();
      *coords[i] = x + h;
      const double up = objective();
      *coords[i] = x - h;
      const double down = objective();
      *coords[i] = x;
      if (testing::rel_err((up - f0) / h, (f0 - down) / h, 1e-3) > 1e-2) {
        ++kinks;
        continue;
      }
      const double fd = (up - down) / (2 * h);
      worst_fd = std::max(worst_fd, testing::rel_err(-rev[i] / lambda, fd, kFdFloor));
      ++drawn;
      ++fd_checked;
    }
  }
  const bool pass = exact && worst_fd <= kFdRelTol;
  return {pass, std::string("reversed == -lambda * plain ") + (exact ? "exactly" : "NOT exactly") +
                    " (lambda 1, 0.5); FD max rel err " + sci(worst_fd) + " on " + std::to_string(fd_checked) +
                    " coordinates (" + std::to_string(kinks) + " on kinks redrawn)"};
}

Outcome metric_oracles(Context&) {
  Rng rng(4040);
  const auto kt = metrics::KappaTable::coco();
  auto diff = [](const std::optional<double>& a, const std::optional<double>& b) {
    if (a.has_value() != b.has_value()) return std::numeric_limits<double>::infinity();
    return a ? std::abs(*a - *b) : 0.0;
  };
  double ap = 0, mr = 0, iou = 0;
  for (int t = 0; t < kRandomCases; ++t) {
    const auto images = testing::random_keypoint_case(rng);
    const auto s = metrics::keypoint_ap(images);
    ap = std::max({ap, diff(s.ap, testing::ap_mean_reference(images, metrics::kAreaAll, kt)),
                   diff(s.ap50, testing::ap_reference(images, 0.5, metrics::kAreaAll, kt)),
                   diff(s.ap75, testing::ap_reference(images, 0.75, metrics::kAreaAll, kt)),
                   diff(s.ap_m, testing::ap_mean_reference(images, metrics::kAreaMedium, kt)),
                   diff(s.ap_l, testing::ap_mean_reference(images, metrics::kAreaLarge, kt))});
  }
  for (int t = 0; t < kRandomCases; ++t) {
    const auto images = testing::random_box_case(rng);
    for (auto bin : {metrics::VisibilityBin::kReasonable, metrics::VisibilityBin::kHeavyOcclusion,
                     metrics::VisibilityBin::kReasonableHeavy})
      mr = std::max(mr, diff(metrics::miss_rate(images, bin), testing::miss_rate_reference(images, bin)));
  }
  for (int t = 0; t < kRandomCases; ++t) {
    const auto images = testing::random_seg_case(rng);
    for (Category c : {Category::kPerson, Category::kRider})
      iou = std::max(iou, diff(metrics::instance_seg_iou(images, c), testing::seg_iou_reference(images, c)));
  }
  const bool pass = ap <= kMetricTol && mr <= kMetricTol && iou <= kMetricTol;
  return {pass, "max abs diff over " + std::to_string(kRandomCases) + " cases each: AP " + sci(ap) + ", MR " +
                    sci(mr) + ", IoU " + sci(iou)};
}

Outcome schedules(Context& ctx) {
  const train::TrainConfig& tc = ctx.reference.train;
  bool ok = train::lr_schedule(0, tc) == 0.01 && train::lr_schedule(tc.decay_every, tc) == 0.001 &&
            train::lr_schedule(2L * tc.decay_every, tc) == 0.0001;
  ok = ok && train::mask_schedule(0, tc.stage2_steps, tc.mask_start, tc.mask_end) == tc.mask_start &&
       train::mask_schedule(tc.stage2_steps, tc.stage2_steps, tc.mask_start, tc.mask_end) == tc.mask_end;
  // Every logged stage-2 step of a reference run against the closed forms.
  const auto& run = ctx.run(tc.weights.beta, kSeeds.front());
  long checked = 0, bad = 0;
  std::ifstream log(run.dir / "steps.jsonl");
  for (std::string line; std::getline(log, line);) {
    const auto r = train::step_report_from_json(line);
    const long local = r.stage == 1 ? (r.step < tc.stage1_steps ? r.step : r.step - tc.stage1_steps)
                                    : r.step - 2L * tc.stage1_steps;
    const double lr = tc.lr0 / std::pow(tc.decay_factor, std::floor(static_cast<double>(local) / tc.decay_every));
    bad += r.lr != lr;
    if (r.stage == 2) {
      const double m = tc.mask_start + (tc.mask_end - tc.mask_start) * static_cast<double>(local) / tc.stage2_steps;
      bad += r.mask_fraction != m;
    }
    ++checked;
  }
  const bool pass = ok && checked == tc.total_steps() && bad == 0;
  return {pass, "lr 0.01/0.001/0.0001 at steps 0/" + std::to_string(tc.decay_every) + "/" +
                    std::to_string(2 * tc.decay_every) + (ok ? " exact" : " WRONG") + "; " +
                    std::to_string(checked) + " logged steps, " + std::to_string(bad) + " mismatches"};
}

// Non-increasing over the sweep, allowing one adjacent rise of at most the slack.
bool trend_holds(const std::vector<metrics::SweepPoint>& sweep, std::string* why) {
  int rises = 0;
  double worst = 0;
  for (std::size_t i = 1; i < sweep.size(); ++i) {
    const double rise = sweep[i].mean - sweep[i - 1].mean;
    if (rise > 0) {
      ++rises;
      worst = std::max(worst, rise);
    }
  }
  *why = std::to_string(rises) + " rise(s), max " + fmt(worst);
  return sweep.size() == 6 && (rises == 0 || (rises == 1 && worst <= kTrendSlack));
}

Outcome occlusion_trend(Context& ctx) {
  int holds = 0;
  double minutes = 0;
  std::string detail;
  for (std::uint64_t seed : kSeeds) {
    const auto& r = ctx.run(ctx.reference.train.weights.beta, seed);
    minutes += r.minutes;
    std::string why = "run failed";
    bool ok = r.exit_code == 0 && trend_holds(r.report.sweep, &why);
    holds += ok;
    detail += "seed " + std::to_string(seed) + " [";
    for (std::size_t i = 0; i < r.report.sweep.size(); ++i) detail += (i ? " " : "") + fmt(r.report.sweep[i].mean, 3);
    detail += "] " + why + (ok ? " ok; " : " no; ");
  }
  const bool pass = holds >= 2 && minutes < kTrendBudgetMin;
  return {pass, std::to_string(holds) + "/3 seeds hold; " + detail + fmt(minutes, 1) + " min"};
}

Outcome adaptation_gain(Context& ctx) {
  int wins = 0;
  double minutes = 0;
  std::string detail;
  for (std::uint64_t seed : kSeeds) {
    const auto& on = ctx.run(1.0, seed);
    const auto& off = ctx.run(0.0, seed);
    minutes += on.minutes + off.minutes;
    const double a = on.report.target_keypoint && on.report.target_keypoint->ap ? *on.report.target_keypoint->ap : -1;
    const double b = off.report.target_keypoint && off.report.target_keypoint->ap ? *off.report.target_keypoint->ap : -1;
    const bool win = on.exit_code == 0 && off.exit_code == 0 && a > b;
    wins += win;
    detail += "seed " + std::to_string(seed) + " " + fmt(a) + " vs " + fmt(b) + "; ";
  }
  const bool pass = wins >= 2 && minutes < kAdaptationBudgetMin;
  return {pass, "target AP beta=1 vs beta=0: " + detail + std::to_string(wins) + "/3 wins; " + fmt(minutes, 1) + " min"};
}

Outcome occluder_accuracy(Context& ctx) {
  auto params = ctx.reference.target;
  params.occluder_rate = 0.0;
  std::vector<std::pair<Sample, int>> pool;
  for (std::uint64_t seed = 0; static_cast<int>(pool.size()) < kOccluderInstances; ++seed) {
    const Sample s = synth::generate_sample(params, 5000 + seed);
    for (std::size_t i = 0; i < s.instances.size() && static_cast<int>(pool.size()) < kOccluderInstances; ++i)
      if (s.instances[i].visibility_ratio == 1.0) pool.emplace_back(s, static_cast<int>(i));
  }
  double worst = 0;
  int outside = 0;
  for (double p : metrics::default_sweep_fractions()) {
    for (std::size_t k = 0; k < pool.size(); ++k) {
      const auto& [s, i] = pool[k];
      const Sample o = synth::occlude_instance(s, i, p, 900 + k);
      const Mask& a = s.instances[i].mask;
      const Mask& b = o.instances[i].mask;
      long orig = 0, gone = 0;
      for (Eigen::Index j = 0; j < a.size(); ++j) {
        orig += a.data()[j] != 0;
        gone += a.data()[j] != 0 && b.data()[j] == 0;
      }
      const double err = std::abs(static_cast<double>(gone) / static_cast<double>(orig) - p);
      worst = std::max(worst, err);
      outside += err > kOccluderTol;
    }
  }
  return {outside == 0, "max |achieved - requested| " + fmt(worst) + " over " + std::to_string(pool.size()) +
                            " instances x 6 fractions; " + std::to_string(outside) + " outside tolerance"};
}

Outcome reproducibility(Context& ctx) {
  const synth::Dataset src = synth::read_dataset(ctx.data / "source_train");
  const synth::Dataset tgt = synth::read_dataset(ctx.data / "target_train");
  train::TrainConfig tc = ctx.reference.train;
  tc.stage1_steps = 50;
  tc.stage2_steps = 100;
  tc.checkpoint_every = 100;
  auto fresh = [&](std::uint64_t seed) {
    train::TrainConfig c = tc;
    c.seed = seed;
    nn::ModelConfig m = ctx.reference.model;
    m.init_seed = seed;
    return train::Trainer(m, c);
  };
  train::Trainer a = fresh(1), b = fresh(1), c = fresh(2);
  const auto ha = train::run_training(a, src, tgt).parameter_hash;
  const auto hb = train::run_training(b, src, tgt).parameter_hash;
  const auto hc = train::run_training(c, src, tgt).parameter_hash;

  const fs::path dir = ctx.out / "resume";
  fs::remove_all(dir);
  train::Trainer first = fresh(1);
  train::RunOptions stop;
  stop.run_dir = dir;
  stop.stop_after = 130;
  train::run_training(first, src, tgt, stop);
  train::Trainer second = fresh(1);
  train::RunOptions resume;
  resume.run_dir = dir;
  resume.resume = true;
  const auto rr = train::run_training(second, src, tgt, resume);
  const bool resumed_from_100 = !rr.history.empty() && rr.history.front().step == 100;

  // Dataset generation is part of the reproducible state too.
  const auto regen = synth::build_dataset(ctx.reference.source, ctx.reference.n_train,
                                          src.manifest.seed).content_hash();
  const bool data_same = regen == src.content_hash();

  char buf[256];
  std::snprintf(buf, sizeof(buf), "same seed %016llx/%016llx, other seed %016llx, resumed %016llx (from step %ld)%s",
                static_cast<unsigned long long>(ha), static_cast<unsigned long long>(hb),
                static_cast<unsigned long long>(hc), static_cast<unsigned long long>(rr.parameter_hash),
                rr.history.empty() ? -1L : rr.history.front().step, data_same ? "; data regenerates identically" : "; DATA DIFFERS");
  const bool pass = ha == hb && ha != hc && rr.parameter_hash == ha && resumed_from_100 && data_same;
  return {pass, buf};
}

Outcome backbone_ablation(Context& ctx) {
  const fs::path out = ctx.out / "ablation";
  fs::remove_all(out);
  cli::EvalArgs a;
  a.config = ctx.config;
  a.data = ctx.data;
  a.out = out;
  a.ablate_backbone = true;
  const auto t0 = Clock::now();
  const int code = cli::cmd_eval(a);
  const double minutes = minutes_since(t0);
  std::set<std::string> rows;
  std::istringstream is(read_file(out / "ablation.kv"));
  for (std::string line; std::getline(is, line);) {
    if (line.rfind("ablation.", 0) != 0) continue;
    const std::string rest = line.substr(9);
    rows.insert(rest.substr(0, rest.find('.')));
  }
  std::string names;
  for (const auto& r : rows) names += (names.empty() ? "" : ",") + r;
  const std::string text = read_file(out / "ablation.txt");
  const bool pass = code == 0 && rows.size() == 3 && minutes < kAblationBudgetMin && !text.empty();
  return {pass, std::to_string(rows.size()) + " rows (" + names + "); " + fmt(minutes, 1) + " min"};
}

}  // namespace

int main(int argc, char** argv) {
  Context ctx;
  std::set<std::string> only;
  ctx.out = "acceptance_out";
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      std::istringstream is(argv[++i]);
      for (std::string n; std::getline(is, n, ',');) only.insert(n);
    } else {
      ctx.out = a;
    }
  }
  fs::create_directories(ctx.out);
  ctx.reference = cli::apply_config(cli::load_config_file(ctx.config));
  ctx.data = ctx.out / "data";

  cli::GenDataArgs g;
  g.config = ctx.config;
  g.out = ctx.data;
  g.force = true;
  if (cli::cmd_gen_data(g) != 0) {
    std::printf("FAIL setup: gen-data failed\n");
    return 1;
  }

  // Wall-clock budgets in minutes. Reference trainings are charged to the
  // checks that compare their outcomes, which enforce their own budgets.
  struct Check {
    std::string name;
    std::function<Outcome(Context&)> fn;
    double budget;
  };
  const std::vector<Check> checks = {
      {"loss-combination", loss_combination, 1.0 / 60},
      {"asymmetric-update", asymmetric_update, 10},
      {"gradient-reversal", gradient_reversal, 1},
      {"metric-oracles", metric_oracles, 5},
      {"schedules", schedules, 1.0 / 60},
      {"occlusion-trend", occlusion_trend, kTrendBudgetMin},
      {"adaptation-gain", adaptation_gain, kAdaptationBudgetMin},
      {"occluder-accuracy", occluder_accuracy, 1},
      {"reproducibility", reproducibility, 15},
      {"backbone-ablation", backbone_ablation, kAblationBudgetMin},
  };
  int failed = 0;
  std::vector<std::string> lines;
  for (const Check& c : checks) {
    if (!only.empty() && !only.count(c.name)) continue;
    Outcome o;
    const auto t0 = Clock::now();
    const double trained_before = ctx.run_minutes;
    try {
      o = c.fn(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double own = minutes_since(t0) - (ctx.run_minutes - trained_before);
    if (own > c.budget) {
      o.pass = false;
      o.detail += "; over budget";
    }
    failed += !o.pass;
    char took[64];
    std::snprintf(took, sizeof(took), " [%.1f s]", own * 60);
    const std::string line = std::string(o.pass ? "PASS " : "FAIL ") + c.name + ": " + o.detail + took;
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    lines.push_back(line);
  }
  std::ofstream(ctx.out / "acceptance.txt") << [&] {
    std::string s;
    for (const auto& l : lines) s += l + "\n";
    return s;
  }();
  return failed == 0 ? 0 : 1;
}
