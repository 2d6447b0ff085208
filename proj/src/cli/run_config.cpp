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

#include "occpose/cli/run_config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace occpose::cli {
namespace {

namespace fs = std::filesystem;

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string format(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
std::string format(int v) { return std::to_string(v); }
std::string format(std::uint64_t v) { return std::to_string(v); }
std::string format(bool v) { return v ? "true" : "false"; }
std::string format(const std::string& v) { return v; }
std::string format(nn::BackboneSize v) { return std::string(nn::to_string(v)); }
template <typename T>
std::string format(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format(v[i]);
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& v) {
  throw ConfigError("config: bad value for " + key + ": '" + v + "'");
}

void parse(const std::string& key, const std::string& v, double& out) {
  std::size_t n = 0;
  try {
    out = std::stod(v, &n);
  } catch (const std::exception&) {
    bad_value(key, v);
  }
  if (n != v.size()) bad_value(key, v);
}
void parse(const std::string& key, const std::string& v, int& out) {
  std::size_t n = 0;
  try {
    out = std::stoi(v, &n);
  } catch (const std::exception&) {
    bad_value(key, v);
  }
  if (n != v.size()) bad_value(key, v);
}
void parse(const std::string& key, const std::string& v, std::uint64_t& out) {
  std::size_t n = 0;
  if (v.empty() || v[0] == '-') bad_value(key, v);
  try {
    out = std::stoull(v, &n);
  } catch (const std::exception&) {
    bad_value(key, v);
  }
  if (n != v.size()) bad_value(key, v);
}
void parse(const std::string& key, const std::string& v, bool& out) {
  if (v == "true" || v == "1") {
    out = true;
  } else if (v == "false" || v == "0") {
    out = false;
  } else {
    bad_value(key, v);
  }
}
void parse(const std::string&, const std::string& v, std::string& out) { out = v; }
void parse(const std::string& key, const std::string& v, nn::BackboneSize& out) {
  try {
    out = nn::backbone_from_string(v);
  } catch (const std::exception&) {
    bad_value(key, v);
  }
}
template <typename T>
void parse(const std::string& key, const std::string& v, std::vector<T>& out) {
  out.clear();
  if (v.empty()) return;
  std::istringstream is(v);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    T x{};
    parse(key, trim(tok), x);
    out.push_back(x);
  }
}

struct Field {
  std::string key;
  std::function<std::string(RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename Acc>
Field field(std::string key, Acc acc) {
  return {key, [acc](RunConfig& c) { return format(acc(c)); },
          [acc, key](RunConfig& c, const std::string& v) { parse(key, v, acc(c)); }};
}

void add_distribution(std::vector<Field>& f, const std::string& p,
                      synth::DistributionParams RunConfig::*which) {
  auto d = [which](RunConfig& c) -> synth::DistributionParams& { return c.*which; };
  f.push_back(field(p + "image_height", [d](RunConfig& c) -> int& { return d(c).image_height; }));
  f.push_back(field(p + "image_width", [d](RunConfig& c) -> int& { return d(c).image_width; }));
  f.push_back(field(p + "min_pedestrians", [d](RunConfig& c) -> int& { return d(c).min_pedestrians; }));
  f.push_back(field(p + "max_pedestrians", [d](RunConfig& c) -> int& { return d(c).max_pedestrians; }));
  f.push_back(field(p + "limb_length_scale", [d](RunConfig& c) -> double& { return d(c).limb_length_scale; }));
  f.push_back(field(p + "limb_width", [d](RunConfig& c) -> double& { return d(c).limb_width; }));
  f.push_back(field(p + "body_hue", [d](RunConfig& c) -> double& { return d(c).body_hue; }));
  f.push_back(field(p + "background_texture_scale",
                    [d](RunConfig& c) -> double& { return d(c).background_texture_scale; }));
  f.push_back(field(p + "noise_level", [d](RunConfig& c) -> double& { return d(c).noise_level; }));
  f.push_back(field(p + "occluder_rate", [d](RunConfig& c) -> double& { return d(c).occluder_rate; }));
  f.push_back(field(p + "rider_rate", [d](RunConfig& c) -> double& { return d(c).rider_rate; }));
  f.push_back(field(p + "allow_overlap", [d](RunConfig& c) -> bool& { return d(c).allow_overlap; }));
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(field("data.n_train", [](RunConfig& c) -> int& { return c.n_train; }));
    f.push_back(field("data.n_eval", [](RunConfig& c) -> int& { return c.n_eval; }));
    f.push_back(field("data.seed", [](RunConfig& c) -> std::uint64_t& { return c.data_seed; }));
    f.push_back(field("data.dir", [](RunConfig& c) -> std::string& { return c.data_dir; }));
    add_distribution(f, "source.", &RunConfig::source);
    add_distribution(f, "target.", &RunConfig::target);

    f.push_back(field("model.backbone", [](RunConfig& c) -> nn::BackboneSize& { return c.model.backbone_size; }));
    f.push_back(field("model.fpn_levels", [](RunConfig& c) -> int& { return c.model.fpn_levels; }));
    f.push_back(field("model.fpn_channels", [](RunConfig& c) -> int& { return c.model.fpn_channels; }));
    f.push_back(field("model.base_width", [](RunConfig& c) -> int& { return c.model.base_width; }));
    f.push_back(field("model.pose_channels", [](RunConfig& c) -> int& { return c.model.pose_channels; }));
    f.push_back(field("model.heatmap_stride", [](RunConfig& c) -> int& { return c.model.heatmap_stride; }));
    f.push_back(field("model.roi_size", [](RunConfig& c) -> int& { return c.model.roi_size; }));
    f.push_back(field("model.grl_lambda", [](RunConfig& c) -> double& { return c.model.grl_lambda; }));
    f.push_back(field("model.init_seed", [](RunConfig& c) -> std::uint64_t& { return c.model.init_seed; }));

    f.push_back(field("train.lr0", [](RunConfig& c) -> double& { return c.train.lr0; }));
    f.push_back(field("train.momentum", [](RunConfig& c) -> double& { return c.train.momentum; }));
    f.push_back(field("train.decay_every", [](RunConfig& c) -> int& { return c.train.decay_every; }));
    f.push_back(field("train.decay_factor", [](RunConfig& c) -> double& { return c.train.decay_factor; }));
    f.push_back(field("train.batch_size", [](RunConfig& c) -> int& { return c.train.batch_size; }));
    f.push_back(field("train.stage1_steps", [](RunConfig& c) -> int& { return c.train.stage1_steps; }));
    f.push_back(field("train.stage2_steps", [](RunConfig& c) -> int& { return c.train.stage2_steps; }));
    f.push_back(field("train.mask_start", [](RunConfig& c) -> double& { return c.train.mask_start; }));
    f.push_back(field("train.mask_end", [](RunConfig& c) -> double& { return c.train.mask_end; }));
    f.push_back(field("train.curriculum", [](RunConfig& c) -> std::string& { return c.train.curriculum; }));
    f.push_back(field("train.alpha", [](RunConfig& c) -> double& { return c.train.weights.alpha; }));
    f.push_back(field("train.beta", [](RunConfig& c) -> double& { return c.train.weights.beta; }));
    f.push_back(field("train.gamma", [](RunConfig& c) -> double& { return c.train.weights.gamma; }));
    f.push_back(field("train.seed", [](RunConfig& c) -> std::uint64_t& { return c.train.seed; }));
    f.push_back(field("train.augment.flip", [](RunConfig& c) -> bool& { return c.train.augment.flip; }));
    f.push_back(field("train.augment.blur", [](RunConfig& c) -> bool& { return c.train.augment.blur; }));
    f.push_back(field("train.augment.brightness", [](RunConfig& c) -> bool& { return c.train.augment.brightness; }));
    f.push_back(field("train.heatmap_sigma", [](RunConfig& c) -> double& { return c.train.heatmap_sigma; }));
    f.push_back(field("train.checkpoint_every", [](RunConfig& c) -> int& { return c.train.checkpoint_every; }));
    f.push_back(field("train.min_mask_overlap", [](RunConfig& c) -> double& { return c.train.min_mask_overlap; }));

    f.push_back(field("eval.score_threshold", [](RunConfig& c) -> double& { return c.eval.inference.score_threshold; }));
    f.push_back(field("eval.nms_iou", [](RunConfig& c) -> double& { return c.eval.inference.nms_iou; }));
    f.push_back(field("eval.max_detections", [](RunConfig& c) -> int& { return c.eval.inference.max_detections; }));
    f.push_back(field("eval.keypoint_threshold",
                      [](RunConfig& c) -> double& { return c.eval.inference.keypoint_threshold; }));
    f.push_back(field("eval.occlusion_sweep", [](RunConfig& c) -> bool& { return c.eval.occlusion_sweep; }));
    f.push_back(field("eval.sweep_fractions",
                      [](RunConfig& c) -> std::vector<double>& { return c.eval.sweep_fractions; }));
    f.push_back(field("eval.sweep_seeds",
                      [](RunConfig& c) -> std::vector<std::uint64_t>& { return c.eval.sweep_seeds; }));
    f.push_back(field("out", [](RunConfig& c) -> std::string& { return c.out_dir; }));
    return f;
  }();
  return table;
}

void parse_into(const std::string& text, const fs::path& base_dir, KeyValues& out,
                std::vector<fs::path>& stack) {
  std::istringstream is(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.starts_with("include ") || line.starts_with("include\t")) {
      fs::path p = trim(line.substr(8));
      if (p.is_relative()) p = base_dir / p;
      if (!fs::exists(p)) throw ConfigError("config: include not found: " + p.string());
      const fs::path canon = fs::weakly_canonical(p);
      for (const fs::path& open : stack) {
        if (open == canon) throw ConfigError("config: include cycle at " + p.string());
      }
      std::ifstream in(p);
      std::stringstream ss;
      ss << in.rdbuf();
      stack.push_back(canon);
      parse_into(ss.str(), p.parent_path(), out, stack);
      stack.pop_back();
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config: line " + std::to_string(line_no) + ": empty key");
    out.emplace_back(key, trim(line.substr(eq + 1)));
  }
}

}  // namespace

void RunConfig::validate() const {
  if (n_train <= 0 || n_eval <= 0) throw ConfigError("config: data.n_train and data.n_eval must be > 0");
  if (source.domain != Domain::kSource || target.domain != Domain::kTarget) {
    throw ConfigError("config: preset domains are fixed");
  }
  try {
    model.validate();
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  for (double f : eval.sweep_fractions) {
    if (f < 0 || f >= 1) throw ConfigError("config: sweep fractions must lie in [0, 1)");
  }
  if (eval.sweep_seeds.empty()) throw ConfigError("config: eval.sweep_seeds is empty");
}

bool operator==(const RunConfig& a, const RunConfig& b) {
  return to_config_text(a) == to_config_text(b);
}

KeyValues parse_config_text(const std::string& text, const fs::path& base_dir) {
  KeyValues out;
  std::vector<fs::path> stack;
  parse_into(text, base_dir, out, stack);
  return out;
}

KeyValues load_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  KeyValues out;
  std::vector<fs::path> stack = {fs::weakly_canonical(path)};
  parse_into(ss.str(), path.parent_path(), out, stack);
  return out;
}

RunConfig apply_config(const KeyValues& kv, RunConfig base) {
  for (const auto& [k, v] : kv) {
    bool found = false;
    for (const Field& f : fields()) {
      if (f.key == k) {
        f.set(base, v);
        found = true;
        break;
      }
    }
    if (!found) throw ConfigError("config: unknown key " + k);
  }
  return base;
}

std::string to_config_text(const RunConfig& c) {
  RunConfig copy = c;
  std::ostringstream os;
  std::string section;
  for (const Field& f : fields()) {
    const std::string s = f.key.substr(0, f.key.find('.'));
    if (s != section) {
      if (!section.empty()) os << "\n";
      os << "# " << s << "\n";
      section = s;
    }
    os << f.key << " = " << f.get(copy) << "\n";
  }
  return os.str();
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const Field& f : fields()) out.push_back(f.key);
  return out;
}

}  // namespace occpose::cli
