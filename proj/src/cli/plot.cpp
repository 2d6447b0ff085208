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

#include "occpose/cli/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace occpose::cli {
namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 60, kRight = 20, kTop = 30, kBottom = 50;

// Skeleton edges over the 13 joints.
constexpr std::array<std::pair<int, int>, 12> kLimbs = {{
    {1, 2}, {1, 3}, {3, 5}, {2, 4}, {4, 6}, {1, 7},
    {2, 8}, {7, 8}, {7, 9}, {9, 11}, {8, 10}, {10, 12}}};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

struct Axes {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x - x0) / std::max(1e-12, x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / std::max(1e-12, y1 - y0) * (kHeight - kTop - kBottom); }
};

void header(std::ostringstream& os, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kWidth / 2 << "\" y=\"18\" text-anchor=\"middle\">" << title << "</text>\n"
     << "<line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom << "\" x2=\"" << kWidth - kRight
     << "\" y2=\"" << kHeight - kBottom << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
     << kHeight - kBottom << "\" stroke=\"black\"/>\n";
}

void y_ticks(std::ostringstream& os, const Axes& a) {
  for (int i = 0; i <= 4; ++i) {
    const double v = a.y0 + (a.y1 - a.y0) * i / 4.0;
    os << "<text class=\"ytick\" x=\"" << kLeft - 6 << "\" y=\"" << num(a.py(v) + 4)
       << "\" text-anchor=\"end\">" << num(v) << "</text>\n";
  }
}

void set_pixel(Image& img, int x, int y, const std::array<float, 3>& rgb) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  for (int c = 0; c < 3; ++c) img.planes[c](y, x) = rgb[c];
}

void draw_line(Image& img, double x0, double y0, double x1, double y1, const std::array<float, 3>& rgb) {
  const int n = static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)))) + 1;
  for (int i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / n;
    set_pixel(img, static_cast<int>(std::lround(x0 + t * (x1 - x0))),
              static_cast<int>(std::lround(y0 + t * (y1 - y0))), rgb);
  }
}

}  // namespace

std::string loss_curve_svg(const std::vector<long>& steps, const std::vector<double>& losses) {
  std::ostringstream os;
  header(os, "Training loss");
  Axes a{0, 1, 0, 1};
  if (!steps.empty()) {
    a.x0 = static_cast<double>(steps.front());
    a.x1 = static_cast<double>(std::max(steps.back(), steps.front() + 1));
    a.y1 = std::max(1e-6, *std::max_element(losses.begin(), losses.end()));
  }
  y_ticks(os, a);
  os << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">step</text>\n";
  os << "<polyline class=\"loss\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"0.6\" points=\"";
  for (std::size_t i = 0; i < steps.size(); ++i) {
    os << (i ? " " : "") << num(a.px(static_cast<double>(steps[i]))) << "," << num(a.py(losses[i]));
  }
  os << "\"/>\n</svg>\n";
  return os.str();
}

std::string occlusion_svg(const std::vector<metrics::SweepPoint>& sweep) {
  std::ostringstream os;
  header(os, "Keypoint AP by occlusion");
  Axes a{0, 1, 0, 1};
  if (!sweep.empty()) {
    a.x0 = sweep.front().fraction;
    a.x1 = std::max(sweep.back().fraction, a.x0 + 1e-6);
  }
  y_ticks(os, a);
  // Half a step of padding on each side.
  if (sweep.size() > 1) {
    const double pad = (a.x1 - a.x0) / (sweep.size() - 1) / 2;
    a.x0 -= pad;
    a.x1 += pad;
  }
  for (const auto& p : sweep) {
    const double x = a.px(p.fraction);
    os << "<text class=\"xtick\" x=\"" << num(x) << "\" y=\"" << kHeight - kBottom + 18
       << "\" text-anchor=\"middle\">" << std::lround(p.fraction * 100) << "%</text>\n";
    os << "<line x1=\"" << num(x) << "\" y1=\"" << num(a.py(std::max(0.0, p.mean - p.stddev)))
       << "\" x2=\"" << num(x) << "\" y2=\"" << num(a.py(std::min(1.0, p.mean + p.stddev)))
       << "\" stroke=\"gray\"/>\n";
    os << "<circle cx=\"" << num(x) << "\" cy=\"" << num(a.py(p.mean)) << "\" r=\"3\" fill=\"firebrick\"/>\n";
  }
  os << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12
     << "\" text-anchor=\"middle\">occluded fraction</text>\n</svg>\n";
  return os.str();
}

Image draw_overlay(const Image& image, const std::vector<metrics::InstancePrediction>& preds) {
  Image out = image;
  const std::array<float, 3> box_rgb = {1.0f, 1.0f, 0.0f}, limb_rgb = {1.0f, 1.0f, 1.0f},
                             joint_rgb = {1.0f, 0.1f, 0.1f};
  for (const auto& p : preds) {
    const Box& b = p.detection.box;
    draw_line(out, b.x0, b.y0, b.x1 - 1, b.y0, box_rgb);
    draw_line(out, b.x0, b.y1 - 1, b.x1 - 1, b.y1 - 1, box_rgb);
    draw_line(out, b.x0, b.y0, b.x0, b.y1 - 1, box_rgb);
    draw_line(out, b.x1 - 1, b.y0, b.x1 - 1, b.y1 - 1, box_rgb);
    if (!p.keypoints) continue;
    const Keypoints& k = *p.keypoints;
    for (auto [i, j] : kLimbs) {
      if (k[i].labeled() && k[j].labeled()) draw_line(out, k[i].x, k[i].y, k[j].x, k[j].y, limb_rgb);
    }
    for (const Keypoint& kp : k) {
      if (kp.labeled()) set_pixel(out, static_cast<int>(std::lround(kp.x)), static_cast<int>(std::lround(kp.y)), joint_rgb);
    }
  }
  return out;
}

}  // namespace occpose::cli
