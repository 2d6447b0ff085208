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

#include "occpose/synth/generator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "occpose/core/hash.hpp"
#include "occpose/core/rng.hpp"

namespace occpose::synth {

namespace {

constexpr double kNominalBodyHeight = 64.0;
constexpr int kMaxPlacementAttempts = 40;
constexpr int kMaxSceneAttempts = 16;
constexpr double kMinKeptVisibility = 0.1;
constexpr int kMinVisiblePixels = 20;

struct Vec2 {
  double x = 0, y = 0;
};

Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
Vec2 operator*(Vec2 a, double s) { return {a.x * s, a.y * s}; }

using Rgb = std::array<float, 3>;

struct Capsule {
  Vec2 a, b;
  double radius;
  int part;  // index into Figure::colors
};

struct Ring {
  Vec2 centre;
  double radius, thickness;
};

struct Figure {
  std::array<Vec2, kNumKeypoints> joints;
  std::vector<Capsule> capsules;
  std::vector<Ring> wheels;  // rider bicycles; not part of the mask
  std::array<Rgb, 3> colors;  // upper body, legs, head
  Category category = Category::kPerson;
  Vec2 lo, hi;  // extent in pixel coordinates, including wheels
};

Rgb hsv_to_rgb(double h, double s, double v) {
  h = h - std::floor(h);
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp) % 6) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  const double m = v - c;
  return {static_cast<float>(r + m), static_cast<float>(g + m),
          static_cast<float>(b + m)};
}

Vec2 limb_dir(double angle_from_down, double side) {
  return {side * std::sin(angle_from_down), std::cos(angle_from_down)};
}

Figure make_figure(const DistributionParams& p, Rng& rng) {
  Figure f;
  f.category = rng.bernoulli(p.rider_rate) ? Category::kRider : Category::kPerson;
  const double height =
      kNominalBodyHeight * p.limb_length_scale * rng.uniform(0.75, 1.12);
  const double width_jitter = rng.uniform(0.85, 1.15);
  const double limb_r = 0.5 * p.limb_width * width_jitter * height / kNominalBodyHeight;

  const double lean = rng.normal(0.0, 0.12);
  const Vec2 up{std::sin(lean), -std::cos(lean)};
  const Vec2 perp{std::cos(lean), std::sin(lean)};  // towards the person's left

  const Vec2 root{0, 0};
  const Vec2 shoulder_c = root + up * (0.30 * height);
  const double head_tilt = lean + rng.normal(0.0, 0.12);
  const Vec2 nose = shoulder_c + Vec2{std::sin(head_tilt), -std::cos(head_tilt)} *
                                     (0.15 * height);
  auto& j = f.joints;
  j[static_cast<int>(Joint::kNose)] = nose;
  j[static_cast<int>(Joint::kLeftShoulder)] = shoulder_c + perp * (0.11 * height);
  j[static_cast<int>(Joint::kRightShoulder)] = shoulder_c - perp * (0.11 * height);
  j[static_cast<int>(Joint::kLeftHip)] = root + perp * (0.065 * height);
  j[static_cast<int>(Joint::kRightHip)] = root - perp * (0.065 * height);

  for (int side_index = 0; side_index < 2; ++side_index) {
    const double side = side_index == 0 ? 1.0 : -1.0;
    const int off = side_index;  // left joints precede right joints
    const double abduct = rng.uniform(-0.25, 1.7);
    const double bend = rng.uniform(-0.3, 1.9);
    const Vec2 sh = j[static_cast<int>(Joint::kLeftShoulder) + off];
    const Vec2 el = sh + limb_dir(abduct + lean * side, side) * (0.17 * height);
    const Vec2 wr = el + limb_dir(abduct + bend + lean * side, side) * (0.15 * height);
    j[static_cast<int>(Joint::kLeftElbow) + off] = el;
    j[static_cast<int>(Joint::kLeftWrist) + off] = wr;

    double thigh, knee_bend;
    if (f.category == Category::kRider) {
      thigh = rng.uniform(0.9, 1.4);
      knee_bend = -rng.uniform(0.9, 1.5);
    } else {
      thigh = rng.uniform(-0.3, 0.45);
      knee_bend = -rng.uniform(0.0, 0.8) * (thigh > 0 ? 1.0 : -0.3);
    }
    const Vec2 hip = j[static_cast<int>(Joint::kLeftHip) + off];
    const Vec2 kn = hip + limb_dir(thigh, side) * (0.24 * height);
    const Vec2 an = kn + limb_dir(thigh + knee_bend, side) * (0.23 * height);
    j[static_cast<int>(Joint::kLeftKnee) + off] = kn;
    j[static_cast<int>(Joint::kLeftAnkle) + off] = an;
  }

  auto limb = [&](Joint a, Joint b, double r, int part) {
    f.capsules.push_back({j[static_cast<int>(a)], j[static_cast<int>(b)], r, part});
  };
  const Vec2 hip_c = root;
  f.capsules.push_back({shoulder_c, hip_c, 0.085 * height, 0});
  limb(Joint::kLeftShoulder, Joint::kRightShoulder, limb_r, 0);
  limb(Joint::kLeftHip, Joint::kRightHip, limb_r * 1.2, 1);
  limb(Joint::kLeftHip, Joint::kLeftKnee, limb_r * 1.15, 1);
  limb(Joint::kRightHip, Joint::kRightKnee, limb_r * 1.15, 1);
  limb(Joint::kLeftKnee, Joint::kLeftAnkle, limb_r, 1);
  limb(Joint::kRightKnee, Joint::kRightAnkle, limb_r, 1);
  limb(Joint::kLeftShoulder, Joint::kLeftElbow, limb_r, 0);
  limb(Joint::kRightShoulder, Joint::kRightElbow, limb_r, 0);
  limb(Joint::kLeftElbow, Joint::kLeftWrist, limb_r * 0.9, 0);
  limb(Joint::kRightElbow, Joint::kRightWrist, limb_r * 0.9, 0);
  f.capsules.push_back({shoulder_c, nose, limb_r * 0.8, 2});
  f.capsules.push_back({nose, nose, 0.075 * height, 2});

  if (f.category == Category::kRider) {
    const double wheel_r = 0.17 * height;
    const double ground = std::max(j[static_cast<int>(Joint::kLeftAnkle)].y,
                                   j[static_cast<int>(Joint::kRightAnkle)].y);
    f.wheels.push_back({{-0.32 * height, ground - wheel_r * 0.6}, wheel_r, 1.6});
    f.wheels.push_back({{0.32 * height, ground - wheel_r * 0.6}, wheel_r, 1.6});
  }

  const double hue = p.body_hue + rng.uniform(-0.06, 0.06);
  f.colors[0] = hsv_to_rgb(hue, rng.uniform(0.55, 0.85), rng.uniform(0.5, 0.9));
  f.colors[1] = hsv_to_rgb(hue + 0.08, rng.uniform(0.4, 0.7), rng.uniform(0.25, 0.55));
  f.colors[2] = hsv_to_rgb(0.07, 0.45, rng.uniform(0.65, 0.9));

  f.lo = {1e9, 1e9};
  f.hi = {-1e9, -1e9};
  for (const Capsule& c : f.capsules) {
    f.lo.x = std::min({f.lo.x, c.a.x - c.radius, c.b.x - c.radius});
    f.lo.y = std::min({f.lo.y, c.a.y - c.radius, c.b.y - c.radius});
    f.hi.x = std::max({f.hi.x, c.a.x + c.radius, c.b.x + c.radius});
    f.hi.y = std::max({f.hi.y, c.a.y + c.radius, c.b.y + c.radius});
  }
  for (const Ring& w : f.wheels) {
    f.lo.x = std::min(f.lo.x, w.centre.x - w.radius);
    f.lo.y = std::min(f.lo.y, w.centre.y - w.radius);
    f.hi.x = std::max(f.hi.x, w.centre.x + w.radius);
    f.hi.y = std::max(f.hi.y, w.centre.y + w.radius);
  }
  return f;
}

void translate(Figure& f, Vec2 t) {
  for (Vec2& v : f.joints) v = v + t;
  for (Capsule& c : f.capsules) {
    c.a = c.a + t;
    c.b = c.b + t;
  }
  for (Ring& w : f.wheels) w.centre = w.centre + t;
  f.lo = f.lo + t;
  f.hi = f.hi + t;
}

double segment_distance_sq(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a, ap = p - a;
  const double len_sq = ab.x * ab.x + ab.y * ab.y;
  double t = len_sq > 0 ? (ap.x * ab.x + ap.y * ab.y) / len_sq : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const Vec2 d = p - (a + ab * t);
  return d.x * d.x + d.y * d.y;
}

/// Value noise in [-1, 1] with nodes every `scale` pixels.
Eigen::MatrixXf value_noise(int h, int w, double scale, Rng& rng) {
  const int gh = static_cast<int>(std::ceil(h / scale)) + 2;
  const int gw = static_cast<int>(std::ceil(w / scale)) + 2;
  Eigen::MatrixXd grid(gh, gw);
  for (int r = 0; r < gh; ++r)
    for (int c = 0; c < gw; ++c) grid(r, c) = rng.uniform(-1.0, 1.0);
  Eigen::MatrixXf out(h, w);
  for (int y = 0; y < h; ++y) {
    const double gy = y / scale;
    const int iy = static_cast<int>(gy);
    double ty = gy - iy;
    ty = ty * ty * (3 - 2 * ty);
    for (int x = 0; x < w; ++x) {
      const double gx = x / scale;
      const int ix = static_cast<int>(gx);
      double tx = gx - ix;
      tx = tx * tx * (3 - 2 * tx);
      const double top = grid(iy, ix) * (1 - tx) + grid(iy, ix + 1) * tx;
      const double bot = grid(iy + 1, ix) * (1 - tx) + grid(iy + 1, ix + 1) * tx;
      out(y, x) = static_cast<float>(top * (1 - ty) + bot * ty);
    }
  }
  return out;
}

void paint_background(const DistributionParams& p, Rng& rng, Image& img) {
  const int h = img.height, w = img.width;
  const Eigen::MatrixXf coarse = value_noise(h, w, p.background_texture_scale, rng);
  const Eigen::MatrixXf fine =
      value_noise(h, w, std::max(1.5, p.background_texture_scale / 2.5), rng);
  const Eigen::MatrixXf tint = value_noise(h, w, p.background_texture_scale * 2.0, rng);
  const Rgb base = hsv_to_rgb(p.body_hue + 0.45 + rng.uniform(-0.08, 0.08),
                              rng.uniform(0.15, 0.35), rng.uniform(0.45, 0.65));
  const Rgb shift = hsv_to_rgb(p.body_hue + 0.7, 0.5, 0.5);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const float lum = 0.12f * coarse(y, x) + 0.06f * fine(y, x);
        const float t = 0.08f * tint(y, x) * (shift[c] - 0.5f) * 2.0f;
        img.planes[c](y, x) = base[c] + lum + t;
      }
    }
  }
}

struct Layering {
  // Owner of each pixel after painting: figure index, or -1 for background
  // and occluders.
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> owner;
  std::vector<Mask> full;
};

void paint_figure(const Figure& f, int index, Image& img, Layering& layers) {
  const int h = img.height, w = img.width;
  for (const Ring& ring : f.wheels) {
    const int x0 = std::max(0, static_cast<int>(std::floor(ring.centre.x - ring.radius - 1)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(ring.centre.x + ring.radius + 1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(ring.centre.y - ring.radius - 1)));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(ring.centre.y + ring.radius + 1)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double d = std::hypot(x - ring.centre.x, y - ring.centre.y);
        if (std::fabs(d - ring.radius) <= ring.thickness * 0.5) {
          for (int c = 0; c < 3; ++c) img.planes[c](y, x) = 0.12f;
          layers.owner(y, x) = -1;
        }
      }
    }
  }
  Mask& full = layers.full[index];
  full.setZero(h, w);
  for (const Capsule& cap : f.capsules) {
    const double r = cap.radius;
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(cap.a.x, cap.b.x) - r)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(std::max(cap.a.x, cap.b.x) + r)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(cap.a.y, cap.b.y) - r)));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(std::max(cap.a.y, cap.b.y) + r)));
    const Rgb& col = f.colors[cap.part];
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (segment_distance_sq({static_cast<double>(x), static_cast<double>(y)},
                                cap.a, cap.b) > r * r) {
          continue;
        }
        full(y, x) = 1;
        layers.owner(y, x) = index;
        for (int c = 0; c < 3; ++c) img.planes[c](y, x) = col[c];
      }
    }
  }
}

void paint_occluder(const Box& target, const DistributionParams& p, Rng& rng,
                    Image& img, Layering& layers) {
  const double bw = target.width(), bh = target.height();
  const double ow = bw * rng.uniform(0.5, 1.3);
  const double oh = bh * rng.uniform(0.2, 0.55);
  const double cx = rng.uniform(target.x0, target.x1);
  const double cy = rng.uniform(target.y0 + 0.3 * bh, target.y1);
  const int x0 = std::max(0, static_cast<int>(std::lround(cx - ow / 2)));
  const int x1 = std::min(img.width, static_cast<int>(std::lround(cx + ow / 2)));
  const int y0 = std::max(0, static_cast<int>(std::lround(cy - oh / 2)));
  const int y1 = std::min(img.height, static_cast<int>(std::lround(cy + oh / 2)));
  const Rgb col = hsv_to_rgb(p.body_hue + 0.3 + rng.uniform(0.0, 0.4),
                             rng.uniform(0.1, 0.5), rng.uniform(0.2, 0.8));
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const float shade = 0.04f * static_cast<float>((x + y) % 4) - 0.06f;
      for (int c = 0; c < 3; ++c) img.planes[c](y, x) = col[c] + shade;
      layers.owner(y, x) = -1;
    }
  }
}

bool boxes_disjoint(Vec2 alo, Vec2 ahi, Vec2 blo, Vec2 bhi, double gap) {
  return ahi.x + gap < blo.x || bhi.x + gap < alo.x || ahi.y + gap < blo.y ||
         bhi.y + gap < alo.y;
}

void finish_image(const DistributionParams& p, Rng& rng, Image& img) {
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        double v = img.planes[c](y, x) + p.noise_level * rng.normal();
        v = std::clamp(v, 0.0, 1.0);
        img.planes[c](y, x) = static_cast<float>(std::lround(v * 255.0)) / 255.0f;
      }
    }
  }
}

struct Scene {
  Sample sample;  // keypoints populated regardless of domain
};

std::optional<Scene> try_render(const DistributionParams& p, std::uint64_t seed,
                                int attempt) {
  Rng rng(derive_seed(seed, 0x5ce4e, static_cast<std::uint64_t>(attempt)));
  const int h = p.image_height, w = p.image_width;
  Scene scene;
  Sample& s = scene.sample;
  s.image = Image(h, w);
  s.domain = p.domain;
  s.rng_seed = seed;
  paint_background(p, rng, s.image);

  const int n = rng.uniform_int(p.min_pedestrians, p.max_pedestrians);
  std::vector<Figure> figures;
  for (int i = 0; i < n; ++i) {
    Figure f = make_figure(p, rng);
    const double fw = f.hi.x - f.lo.x, fh = f.hi.y - f.lo.y;
    if (fw + 4 > w || fh + 4 > h) continue;
    for (int a = 0; a < kMaxPlacementAttempts; ++a) {
      const double tx = rng.uniform(2.0 - f.lo.x, w - 3.0 - f.hi.x);
      const double ty = rng.uniform(2.0 - f.lo.y, h - 3.0 - f.hi.y);
      const Vec2 lo = f.lo + Vec2{tx, ty}, hi = f.hi + Vec2{tx, ty};
      bool ok = true;
      if (!p.allow_overlap) {
        for (const Figure& g : figures) ok = ok && boxes_disjoint(lo, hi, g.lo, g.hi, 2.0);
      }
      if (!ok) continue;
      translate(f, {tx, ty});
      figures.push_back(std::move(f));
      break;
    }
  }
  if (figures.empty()) return std::nullopt;
  // Lower feet are closer to the camera and painted later.
  std::stable_sort(figures.begin(), figures.end(), [](const Figure& a, const Figure& b) {
    return a.hi.y < b.hi.y;
  });

  Layering layers;
  layers.owner.setConstant(h, w, -1);
  layers.full.resize(figures.size());
  for (std::size_t i = 0; i < figures.size(); ++i) {
    paint_figure(figures[i], static_cast<int>(i), s.image, layers);
    const auto box = mask_bounding_box(layers.full[i]);
    if (box && rng.bernoulli(p.occluder_rate)) {
      paint_occluder(*box, p, rng, s.image, layers);
    }
  }

  for (std::size_t i = 0; i < figures.size(); ++i) {
    const Mask& full = layers.full[i];
    const auto box = mask_bounding_box(full);
    if (!box) continue;
    Mask visible = (layers.owner.array() == static_cast<int>(i)).cast<std::uint8_t>();
    const auto n_full = mask_count(full);
    const auto n_vis = mask_count(visible);
    const double ratio = static_cast<double>(n_vis) / static_cast<double>(n_full);
    if (ratio < kMinKeptVisibility || n_vis < kMinVisiblePixels) continue;
    Instance inst;
    inst.box = *box;
    inst.mask = std::move(visible);
    inst.category = figures[i].category;
    inst.visibility_ratio = n_vis == n_full ? 1.0 : ratio;
    Keypoints kps{};
    for (int k = 0; k < kNumKeypoints; ++k) {
      const Vec2 v = figures[i].joints[k];
      kps[k].x = v.x;
      kps[k].y = v.y;
      const int px = std::clamp(static_cast<int>(std::lround(v.x)), 0, w - 1);
      const int py = std::clamp(static_cast<int>(std::lround(v.y)), 0, h - 1);
      kps[k].visibility = layers.owner(py, px) == static_cast<int>(i)
                              ? Visibility::kLabeledVisible
                              : Visibility::kLabeledInvisible;
    }
    inst.keypoints = kps;
    s.instances.push_back(std::move(inst));
  }
  if (s.instances.empty()) return std::nullopt;
  finish_image(p, rng, s.image);
  s.sample_id = std::string(to_string(p.domain)) + "-" + hex64(seed);
  return scene;
}

Scene render_scene(const DistributionParams& p, std::uint64_t seed) {
  for (int attempt = 0; attempt < kMaxSceneAttempts; ++attempt) {
    if (auto scene = try_render(p, seed, attempt)) return std::move(*scene);
  }
  DistributionParams easy = p;
  easy.occluder_rate = 0.0;
  easy.min_pedestrians = easy.max_pedestrians = 1;
  easy.allow_overlap = true;
  for (int attempt = kMaxSceneAttempts;; ++attempt) {
    if (auto scene = try_render(easy, seed, attempt)) return std::move(*scene);
  }
}

}  // namespace

Sample generate_sample(const DistributionParams& params, std::uint64_t seed) {
  Sample s = render_scene(params, seed).sample;
  if (s.domain == Domain::kTarget) {
    for (Instance& inst : s.instances) inst.keypoints.reset();
  }
  return s;
}

std::vector<Keypoints> generate_pose_oracle(const DistributionParams& params,
                                            std::uint64_t seed) {
  const Sample s = render_scene(params, seed).sample;
  std::vector<Keypoints> out;
  out.reserve(s.instances.size());
  for (const Instance& inst : s.instances) out.push_back(*inst.keypoints);
  return out;
}

namespace {

struct PixelRect {
  int x0, y0, x1, y1;  // half-open
  int area() const { return std::max(0, x1 - x0) * std::max(0, y1 - y0); }
};

}  // namespace

Sample occlude_instance(const Sample& s, int instance_index, double p,
                        std::uint64_t seed) {
  return occlude_instance(s, instance_index, p, seed, nullptr);
}

Sample occlude_instance(const Sample& s, int instance_index, double p,
                        std::uint64_t seed, Keypoints* oracle_keypoints) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw std::invalid_argument("occlude_instance: fraction must be in [0, 1)");
  }
  if (instance_index < 0 || instance_index >= static_cast<int>(s.instances.size())) {
    throw std::out_of_range("occlude_instance: instance index out of range");
  }
  const Instance& target = s.instances[instance_index];
  if (target.visibility_ratio != 1.0) {
    throw std::invalid_argument("occlude_instance: instance is already occluded");
  }
  Sample out = s;
  if (p == 0.0) return out;

  const int h = s.image.height, w = s.image.width;
  const Mask& original = target.mask;
  const auto total = mask_count(original);
  const double goal = p * static_cast<double>(total);
  const double slack = 0.01 * static_cast<double>(total);

  const int bx0 = std::max(0, static_cast<int>(std::floor(target.box.x0)));
  const int by0 = std::max(0, static_cast<int>(std::floor(target.box.y0)));
  const int bx1 = std::min(w, static_cast<int>(std::ceil(target.box.x1)));
  const int by1 = std::min(h, static_cast<int>(std::ceil(target.box.y1)));

  Rng rng(derive_seed(seed, 0x0cc1, static_cast<std::uint64_t>(instance_index)));
  Mask covered = Mask::Zero(h, w);
  std::vector<PixelRect> rects;
  std::int64_t cleared = 0;

  auto newly_cleared = [&](const PixelRect& r) {
    std::int64_t n = 0;
    for (int y = r.y0; y < r.y1; ++y)
      for (int x = r.x0; x < r.x1; ++x) n += original(y, x) && !covered(y, x);
    return n;
  };

  while (static_cast<double>(cleared) < goal - slack) {
    std::vector<std::pair<int, int>> open;
    for (int y = by0; y < by1; ++y)
      for (int x = bx0; x < bx1; ++x)
        if (original(y, x) && !covered(y, x)) open.emplace_back(x, y);
    const auto [ax, ay] = open[rng.uniform_int(0, static_cast<int>(open.size()) - 1)];
    const double aspect = std::exp(rng.uniform(-0.7, 0.7));
    const double budget = goal + slack - static_cast<double>(cleared);
    auto rect_for = [&](int k) {
      const int rw = std::max(1, static_cast<int>(std::lround(k * aspect)));
      const int rh = std::max(1, static_cast<int>(std::lround(k / aspect)));
      const int x0 = ax - (rw - 1) / 2, y0 = ay - (rh - 1) / 2;
      return PixelRect{std::max(bx0, x0), std::max(by0, y0),
                       std::min(bx1, x0 + rw), std::min(by1, y0 + rh)};
    };
    // Rectangles grow monotonically in k, so the largest admissible one is
    // found by bisection.
    int lo = 0, hi = 2 * std::max(bx1 - bx0, by1 - by0) + 2;
    while (lo < hi) {
      const int mid = (lo + hi + 1) / 2;
      if (static_cast<double>(newly_cleared(rect_for(mid))) <= budget) {
        lo = mid;
      } else {
        hi = mid - 1;
      }
    }
    const PixelRect r = rect_for(lo);
    cleared += newly_cleared(r);
    for (int y = r.y0; y < r.y1; ++y)
      for (int x = r.x0; x < r.x1; ++x) covered(y, x) = 1;
    rects.push_back(r);
  }

  Mask any_instance = Mask::Zero(h, w);
  for (const Instance& inst : s.instances) any_instance = any_instance.cwiseMax(inst.mask);
  for (const PixelRect& r : rects) {
    // Background patch: the rectangle-sized region with the fewest instance
    // pixels among a few random placements.
    const int rw = r.x1 - r.x0, rh = r.y1 - r.y0;
    int best_x = 0, best_y = 0;
    std::int64_t best_hits = -1;
    for (int trial = 0; trial < 48 && best_hits != 0; ++trial) {
      const int sx = rng.uniform_int(0, w - rw);
      const int sy = rng.uniform_int(0, h - rh);
      const std::int64_t hits =
          any_instance.block(sy, sx, rh, rw).cast<std::int64_t>().sum();
      if (best_hits < 0 || hits < best_hits) {
        best_hits = hits;
        best_x = sx;
        best_y = sy;
      }
    }
    for (int c = 0; c < 3; ++c) {
      out.image.planes[c].block(r.y0, r.x0, rh, rw) =
          s.image.planes[c].block(best_y, best_x, rh, rw);
    }
  }

  for (std::size_t i = 0; i < out.instances.size(); ++i) {
    Instance& inst = out.instances[i];
    const auto before = mask_count(inst.mask);
    inst.mask = (inst.mask.array() != 0 && covered.array() == 0).cast<std::uint8_t>();
    const auto after = mask_count(inst.mask);
    if (static_cast<int>(i) == instance_index) {
      inst.visibility_ratio =
          1.0 - static_cast<double>(total - after) / static_cast<double>(total);
    } else if (before != after && before > 0) {
      inst.visibility_ratio *= static_cast<double>(after) / static_cast<double>(before);
    }
  }

  auto hide_covered = [&](Keypoints& kps) {
    for (Keypoint& kp : kps) {
      if (!kp.labeled()) continue;
      const int px = std::clamp(static_cast<int>(std::lround(kp.x)), 0, w - 1);
      const int py = std::clamp(static_cast<int>(std::lround(kp.y)), 0, h - 1);
      if (covered(py, px)) kp.visibility = Visibility::kLabeledInvisible;
    }
  };
  if (auto& kps = out.instances[instance_index].keypoints) hide_covered(*kps);
  if (oracle_keypoints) hide_covered(*oracle_keypoints);
  return out;
}

}  // namespace occpose::synth
