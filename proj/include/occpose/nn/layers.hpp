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

#include <algorithm>
#include <cmath>
#include <vector>
#include <stdexcept>
#include <string>

#include "occpose/nn/tensor.hpp"

// Layers cache what their backward pass needs during forward, so a layer
// instance must see forward(x) before the matching backward(dy), one sample
// at a time. backward() accumulates into Param::grad and returns d/dx.

namespace occpose::nn {

template <typename Scalar>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in, int out, int kernel, int stride, int pad, int groups, Rng& rng,
         double gain = 1.0)
      : in_(in), out_(out), kernel_(kernel), stride_(stride), pad_(pad), groups_(groups) {
    if (in % groups != 0 || out % groups != 0) {
      throw std::invalid_argument("Conv2d: channels not divisible by groups");
    }
    const int fan_in = in / groups * kernel * kernel;
    weight = Param<Scalar>(out, fan_in);
    bias = Param<Scalar>(out, 1);
    he_normal(weight, fan_in, rng, gain);
  }

  FeatureMap<Scalar> forward(const FeatureMap<Scalar>& x) {
    if (x.channels != in_) throw std::invalid_argument("Conv2d: input channel mismatch");
    in_h_ = x.height;
    in_w_ = x.width;
    out_h_ = (x.height + 2 * pad_ - kernel_) / stride_ + 1;
    out_w_ = (x.width + 2 * pad_ - kernel_) / stride_ + 1;
    if (pointwise()) {
      col_ = x.data;
    } else {
      im2col(x);
    }
    FeatureMap<Scalar> y(out_, out_h_, out_w_);
    const int cin_g = in_ / groups_ * kernel_ * kernel_, cout_g = out_ / groups_;
    for (int g = 0; g < groups_; ++g) {
      y.data.middleRows(g * cout_g, cout_g).noalias() =
          weight.value.middleRows(g * cout_g, cout_g) * col_.middleRows(g * cin_g, cin_g);
    }
    y.data.colwise() += bias.value.col(0);
    return y;
  }

  FeatureMap<Scalar> backward(const FeatureMap<Scalar>& dy) {
    const int cin_g = in_ / groups_ * kernel_ * kernel_, cout_g = out_ / groups_;
    Matrix<Scalar> dcol(col_.rows(), col_.cols());
    for (int g = 0; g < groups_; ++g) {
      const auto dy_g = dy.data.middleRows(g * cout_g, cout_g);
      weight.grad.middleRows(g * cout_g, cout_g).noalias() +=
          dy_g * col_.middleRows(g * cin_g, cin_g).transpose();
      dcol.middleRows(g * cin_g, cin_g).noalias() =
          weight.value.middleRows(g * cout_g, cout_g).transpose() * dy_g;
    }
    bias.grad.col(0) += dy.data.rowwise().sum();
    FeatureMap<Scalar> dx(in_, in_h_, in_w_);
    if (pointwise()) {
      dx.data = std::move(dcol);
    } else {
      col2im(dcol, dx);
    }
    return dx;
  }

  template <typename Fn>
  void visit(const std::string& prefix, Fn&& fn) {
    fn(prefix + "weight", weight);
    fn(prefix + "bias", bias);
  }

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }

  Param<Scalar> weight;  // out x (in / groups * k * k)
  Param<Scalar> bias;    // out x 1

 private:
  bool pointwise() const { return kernel_ == 1 && stride_ == 1 && pad_ == 0; }

  void im2col(const FeatureMap<Scalar>& x) {
    const int k = kernel_;
    col_.setZero(static_cast<Eigen::Index>(in_) * k * k,
                 static_cast<Eigen::Index>(out_h_) * out_w_);
    for (int ci = 0; ci < in_; ++ci) {
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          Scalar* dst = col_.row((ci * k + ky) * k + kx).data();
          for (int oy = 0; oy < out_h_; ++oy) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= in_h_) continue;
            const Scalar* src = x.data.row(ci).data() + iy * in_w_;
            for (int ox = 0; ox < out_w_; ++ox) {
              const int ix = ox * stride_ - pad_ + kx;
              if (ix >= 0 && ix < in_w_) dst[oy * out_w_ + ox] = src[ix];
            }
          }
        }
      }
    }
  }

  void col2im(const Matrix<Scalar>& dcol, FeatureMap<Scalar>& dx) const {
    const int k = kernel_;
    for (int ci = 0; ci < in_; ++ci) {
      Scalar* dst_row = dx.data.row(ci).data();
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const Scalar* src = dcol.row((ci * k + ky) * k + kx).data();
          for (int oy = 0; oy < out_h_; ++oy) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= in_h_) continue;
            Scalar* dst = dst_row + iy * in_w_;
            for (int ox = 0; ox < out_w_; ++ox) {
              const int ix = ox * stride_ - pad_ + kx;
              if (ix >= 0 && ix < in_w_) dst[ix] += src[oy * out_w_ + ox];
            }
          }
        }
      }
    }
  }

  int in_ = 0, out_ = 0, kernel_ = 1, stride_ = 1, pad_ = 0, groups_ = 1;
  int in_h_ = 0, in_w_ = 0, out_h_ = 0, out_w_ = 0;
  Matrix<Scalar> col_;
};

/// Transposed convolution with kernel 2 and stride 2: doubles H and W.
template <typename Scalar>
class Deconv2x {
 public:
  Deconv2x() = default;
  Deconv2x(int in, int out, Rng& rng, double gain = 1.0) : in_(in), out_(out) {
    weight = Param<Scalar>(static_cast<Eigen::Index>(out) * 4, in);
    bias = Param<Scalar>(out, 1);
    // Each output pixel receives exactly one tap per input channel.
    he_normal(weight, in, rng, gain);
  }

  FeatureMap<Scalar> forward(const FeatureMap<Scalar>& x) {
    if (x.channels != in_) throw std::invalid_argument("Deconv2x: input channel mismatch");
    x_ = x.data;
    h_ = x.height;
    w_ = x.width;
    const Matrix<Scalar> blocks = weight.value * x.data;  // (out*4) x (h*w)
    FeatureMap<Scalar> y(out_, 2 * h_, 2 * w_);
    const int ow = 2 * w_;
    for (int co = 0; co < out_; ++co) {
      Scalar* dst = y.data.row(co).data();
      const Scalar b = bias.value(co, 0);
      for (int a = 0; a < 2; ++a) {
        for (int bb = 0; bb < 2; ++bb) {
          const Scalar* src = blocks.row(co * 4 + a * 2 + bb).data();
          for (int i = 0; i < h_; ++i) {
            for (int j = 0; j < w_; ++j) {
              dst[(2 * i + a) * ow + 2 * j + bb] = src[i * w_ + j] + b;
            }
          }
        }
      }
    }
    return y;
  }

  FeatureMap<Scalar> backward(const FeatureMap<Scalar>& dy) {
    Matrix<Scalar> dblocks(static_cast<Eigen::Index>(out_) * 4,
                           static_cast<Eigen::Index>(h_) * w_);
    const int ow = 2 * w_;
    for (int co = 0; co < out_; ++co) {
      const Scalar* src = dy.data.row(co).data();
      for (int a = 0; a < 2; ++a) {
        for (int bb = 0; bb < 2; ++bb) {
          Scalar* dst = dblocks.row(co * 4 + a * 2 + bb).data();
          for (int i = 0; i < h_; ++i) {
            for (int j = 0; j < w_; ++j) dst[i * w_ + j] = src[(2 * i + a) * ow + 2 * j + bb];
          }
        }
      }
    }
    weight.grad.noalias() += dblocks * x_.transpose();
    bias.grad.col(0) += dy.data.rowwise().sum();
    FeatureMap<Scalar> dx(in_, h_, w_);
    dx.data.noalias() = weight.value.transpose() * dblocks;
    return dx;
  }

  template <typename Fn>
  void visit(const std::string& prefix, Fn&& fn) {
    fn(prefix + "weight", weight);
    fn(prefix + "bias", bias);
  }

  Param<Scalar> weight;  // (out * 4) x in, row = co * 4 + dy * 2 + dx
  Param<Scalar> bias;

 private:
  int in_ = 0, out_ = 0, h_ = 0, w_ = 0;
  Matrix<Scalar> x_;
};

/// Group normalisation with a per-channel affine map.
template <typename Scalar>
class GroupNorm {
 public:
  GroupNorm() = default;
  explicit GroupNorm(int channels, int groups = 4, double eps = 1e-5)
      : channels_(channels), groups_(channels % groups == 0 ? groups : 1), eps_(eps) {
    gamma = Param<Scalar>(channels, 1);
    gamma.value.setOnes();
    beta = Param<Scalar>(channels, 1);
  }

  FeatureMap<Scalar> forward(const FeatureMap<Scalar>& x) {
    if (x.channels != channels_) throw std::invalid_argument("GroupNorm: channel mismatch");
    const int cpg = channels_ / groups_;
    xhat_.resize(x.data.rows(), x.data.cols());
    inv_std_.resize(groups_);
    for (int g = 0; g < groups_; ++g) {
      const auto block = x.data.middleRows(g * cpg, cpg);
      const double mean = static_cast<double>(block.sum()) / block.size();
      const double var = std::max(0.0, static_cast<double>(block.array().square().sum()) / block.size() - mean * mean);
      const Scalar inv = static_cast<Scalar>(1.0 / std::sqrt(var + eps_));
      inv_std_[g] = inv;
      xhat_.middleRows(g * cpg, cpg) = (block.array() - static_cast<Scalar>(mean)) * inv;
    }
    FeatureMap<Scalar> y(x.channels, x.height, x.width);
    y.data = (xhat_.array().colwise() * gamma.value.col(0).array()).colwise() + beta.value.col(0).array();
    return y;
  }

  FeatureMap<Scalar> backward(const FeatureMap<Scalar>& dy) {
    const int cpg = channels_ / groups_;
    gamma.grad.col(0) += dy.data.cwiseProduct(xhat_).rowwise().sum();
    beta.grad.col(0) += dy.data.rowwise().sum();
    const Matrix<Scalar> dxhat = dy.data.array().colwise() * gamma.value.col(0).array();
    FeatureMap<Scalar> dx(dy.channels, dy.height, dy.width);
    for (int g = 0; g < groups_; ++g) {
      const auto d = dxhat.middleRows(g * cpg, cpg);
      const auto xh = xhat_.middleRows(g * cpg, cpg);
      const Scalar n = static_cast<Scalar>(d.size());
      const Scalar mean_d = d.sum() / n;
      const Scalar mean_dx = d.cwiseProduct(xh).sum() / n;
      dx.data.middleRows(g * cpg, cpg) =
          ((d.array() - mean_d) - xh.array() * mean_dx) * inv_std_[g];
    }
    return dx;
  }

  template <typename Fn>
  void visit(const std::string& prefix, Fn&& fn) {
    fn(prefix + "gamma", gamma);
    fn(prefix + "beta", beta);
  }

  Param<Scalar> gamma, beta;

 private:
  int channels_ = 0, groups_ = 1;
  double eps_ = 1e-5;
  Matrix<Scalar> xhat_;
  std::vector<Scalar> inv_std_;
};

template <typename Scalar>
class Relu {
 public:
  /// A non-zero slope gives the leaky variant.
  explicit Relu(Scalar negative_slope = Scalar(0)) : slope_(negative_slope) {}

  FeatureMap<Scalar> forward(const FeatureMap<Scalar>& x) {
    active_ = (x.data.array() > Scalar(0)).select(Matrix<Scalar>::Ones(x.data.rows(), x.data.cols()), slope_);
    FeatureMap<Scalar> y = x;
    y.data = x.data.cwiseProduct(active_);
    return y;
  }
  FeatureMap<Scalar> backward(const FeatureMap<Scalar>& dy) const {
    FeatureMap<Scalar> dx = dy;
    dx.data = dy.data.cwiseProduct(active_);
    return dx;
  }

 private:
  Scalar slope_;
  Matrix<Scalar> active_;
};

template <typename Scalar>
class Sigmoid {
 public:
  FeatureMap<Scalar> forward(const FeatureMap<Scalar>& x) {
    FeatureMap<Scalar> y = x;
    y.data = (Scalar(1) + (-x.data.array()).exp()).inverse().matrix();
    out_ = y.data;
    return y;
  }
  FeatureMap<Scalar> backward(const FeatureMap<Scalar>& dy) const {
    FeatureMap<Scalar> dx = dy;
    dx.data = (dy.data.array() * out_.array() * (Scalar(1) - out_.array())).matrix();
    return dx;
  }

 private:
  Matrix<Scalar> out_;
};

/// Nearest-neighbour x2 upsampling.
template <typename Scalar>
class Upsample2x {
 public:
  FeatureMap<Scalar> forward(const FeatureMap<Scalar>& x) {
    h_ = x.height;
    w_ = x.width;
    FeatureMap<Scalar> y(x.channels, 2 * h_, 2 * w_);
    for (int c = 0; c < x.channels; ++c)
      for (int i = 0; i < 2 * h_; ++i)
        for (int j = 0; j < 2 * w_; ++j) y.at(c, i, j) = x.at(c, i / 2, j / 2);
    return y;
  }
  FeatureMap<Scalar> backward(const FeatureMap<Scalar>& dy) const {
    FeatureMap<Scalar> dx(dy.channels, h_, w_);
    for (int c = 0; c < dy.channels; ++c)
      for (int i = 0; i < 2 * h_; ++i)
        for (int j = 0; j < 2 * w_; ++j) dx.at(c, i / 2, j / 2) += dy.at(c, i, j);
    return dx;
  }

 private:
  int h_ = 0, w_ = 0;
};

/// C x H x W -> C x 1 x 1 spatial mean.
template <typename Scalar>
class GlobalAvgPool {
 public:
  FeatureMap<Scalar> forward(const FeatureMap<Scalar>& x) {
    h_ = x.height;
    w_ = x.width;
    FeatureMap<Scalar> y(x.channels, 1, 1);
    y.data.col(0) = x.data.rowwise().mean();
    return y;
  }
  FeatureMap<Scalar> backward(const FeatureMap<Scalar>& dy) const {
    FeatureMap<Scalar> dx(dy.channels, h_, w_);
    const Scalar inv = Scalar(1) / static_cast<Scalar>(h_ * w_);
    dx.data.colwise() = dy.data.col(0) * inv;
    return dx;
  }

 private:
  int h_ = 0, w_ = 0;
};

/// out[c, y, x] = f[c, y, x] * mean_{y,x} f[c, :, :]
template <typename Scalar>
class SpatialAttention {
 public:
  FeatureMap<Scalar> forward(const FeatureMap<Scalar>& f) {
    f_ = f.data;
    gap_ = f.data.rowwise().mean();
    FeatureMap<Scalar> y = f;
    y.data = f.data.array().colwise() * gap_.array();
    return y;
  }
  FeatureMap<Scalar> backward(const FeatureMap<Scalar>& dy) const {
    FeatureMap<Scalar> dx = dy;
    const Scalar inv = Scalar(1) / static_cast<Scalar>(f_.cols());
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> coupling =
        dy.data.cwiseProduct(f_).rowwise().sum() * inv;
    dx.data = dy.data.array().colwise() * gap_.array();
    dx.data.array().colwise() += coupling.array();
    return dx;
  }

 private:
  Matrix<Scalar> f_;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> gap_;
};

/// Identity forward; multiplies the backward signal by -lambda.
template <typename Scalar>
class GradReverse {
 public:
  explicit GradReverse(double lambda = 1.0) { set_lambda(lambda); }

  void set_lambda(double lambda) {
    if (!(lambda >= 0)) throw std::invalid_argument("GradReverse: lambda must be >= 0");
    lambda_ = lambda;
  }
  double lambda() const { return lambda_; }
  /// Replaces reversal with a plain identity; used to build comparison runs.
  void set_enabled(bool on) { enabled_ = on; }

  FeatureMap<Scalar> forward(const FeatureMap<Scalar>& x) const { return x; }
  FeatureMap<Scalar> backward(const FeatureMap<Scalar>& dy) const {
    if (!enabled_) return dy;
    FeatureMap<Scalar> dx = dy;
    dx.data *= static_cast<Scalar>(-lambda_);
    return dx;
  }

 private:
  double lambda_ = 1.0;
  bool enabled_ = true;
};

/// Zeroes a rectangle of cells in every channel (curriculum masking).
template <typename Scalar>
class BlockMask {
 public:
  struct Rect {
    int y0 = 0, x0 = 0, y1 = 0, x1 = 0;  // half-open cell range
  };

  void set_rect(Rect r) { rect_ = r; }
  const Rect& rect() const { return rect_; }

  FeatureMap<Scalar> forward(const FeatureMap<Scalar>& x) const { return apply(x); }
  FeatureMap<Scalar> backward(const FeatureMap<Scalar>& dy) const { return apply(dy); }

 private:
  FeatureMap<Scalar> apply(const FeatureMap<Scalar>& x) const {
    FeatureMap<Scalar> y = x;
    for (int c = 0; c < x.channels; ++c)
      for (int i = std::max(0, rect_.y0); i < std::min(x.height, rect_.y1); ++i)
        for (int j = std::max(0, rect_.x0); j < std::min(x.width, rect_.x1); ++j)
          y.at(c, i, j) = Scalar(0);
    return y;
  }

  Rect rect_;
};

}  // namespace occpose::nn
