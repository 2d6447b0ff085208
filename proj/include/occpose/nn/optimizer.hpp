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

#include <map>
#include <set>
#include <string>
#include <string_view>

#include "occpose/nn/model.hpp"

namespace occpose::nn {

/// Heavy-ball SGD: v = momentum * v + g; p -= lr * v. Only parameters of the
/// selected components are touched, including their velocity buffers.
template <typename Scalar>
class MomentumSgd {
 public:
  explicit MomentumSgd(double momentum = 0.9) : momentum_(momentum) {}

  double momentum() const { return momentum_; }

  void step(Model<Scalar>& model, double lr, const std::set<std::string>& components) {
    const Scalar mu = static_cast<Scalar>(momentum_), rate = static_cast<Scalar>(lr);
    model.visit_params([&](std::string_view component, const std::string& name, Param<Scalar>& p) {
      if (!components.count(std::string(component))) return;
      Matrix<Scalar>& v = velocity(component, name, p);
      v = mu * v + p.grad;
      p.value -= rate * v;
    });
  }

  /// Velocity buffers keyed by component, then parameter name.
  std::map<std::string, std::map<std::string, Matrix<Scalar>>>& buffers() { return velocity_; }
  const std::map<std::string, std::map<std::string, Matrix<Scalar>>>& buffers() const {
    return velocity_;
  }

 private:
  Matrix<Scalar>& velocity(std::string_view component, const std::string& name,
                           const Param<Scalar>& p) {
    auto& slot = velocity_[std::string(component)][name];
    if (slot.size() == 0) slot = Matrix<Scalar>::Zero(p.value.rows(), p.value.cols());
    return slot;
  }

  double momentum_;
  std::map<std::string, std::map<std::string, Matrix<Scalar>>> velocity_;
};

}  // namespace occpose::nn
