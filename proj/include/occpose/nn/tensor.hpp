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

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "occpose/core/rng.hpp"
#include "occpose/core/types.hpp"

namespace occpose::nn {

template <typename Scalar>
using Matrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// C x H x W activation. Row c of `data` is channel c in row-major order.
template <typename Scalar>
struct FeatureMap {
  int channels = 0, height = 0, width = 0;
  Matrix<Scalar> data;

  FeatureMap() = default;
  FeatureMap(int c, int h, int w)
      : channels(c), height(h), width(w),
        data(Matrix<Scalar>::Zero(c, static_cast<Eigen::Index>(h) * w)) {}

  static FeatureMap constant(int c, int h, int w, Scalar v) {
    FeatureMap f(c, h, w);
    f.data.setConstant(v);
    return f;
  }

  int pixels() const { return height * width; }
  Scalar& at(int c, int y, int x) { return data(c, y * width + x); }
  Scalar at(int c, int y, int x) const { return data(c, y * width + x); }

  bool same_shape(const FeatureMap& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }

  template <typename Other>
  FeatureMap<Other> cast() const {
    FeatureMap<Other> out;
    out.channels = channels;
    out.height = height;
    out.width = width;
    out.data = data.template cast<Other>();
    return out;
  }

  FeatureMap& operator+=(const FeatureMap& o) {
    if (!same_shape(o)) throw std::invalid_argument("FeatureMap += shape mismatch");
    data += o.data;
    return *this;
  }
};

template <typename Scalar>
FeatureMap<Scalar> from_image(const Image& img) {
  FeatureMap<Scalar> f(3, img.height, img.width);
  for (int c = 0; c < 3; ++c) {
    f.data.row(c) = Eigen::Map<const Eigen::RowVectorXf>(
                        img.planes[c].data(), img.planes[c].size())
                        .template cast<Scalar>();
  }
  return f;
}

/// A trainable tensor with its accumulated gradient.
template <typename Scalar>
struct Param {
  Matrix<Scalar> value;
  Matrix<Scalar> grad;

  Param() = default;
  Param(Eigen::Index rows, Eigen::Index cols)
      : value(Matrix<Scalar>::Zero(rows, cols)),
        grad(Matrix<Scalar>::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
};

/// He-normal initialisation from a deterministic stream.
template <typename Scalar>
void he_normal(Param<Scalar>& p, int fan_in, Rng& rng, double gain = 1.0) {
  const double stddev = gain * std::sqrt(2.0 / fan_in);
  for (Eigen::Index i = 0; i < p.value.size(); ++i) {
    p.value.data()[i] = static_cast<Scalar>(stddev * rng.normal());
  }
}

}  // namespace occpose::nn
