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

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include "occpose/nn/model.hpp"
#include "occpose/nn/optimizer.hpp"

namespace occpose::nn {

// Binary layout, all integers little-endian:
//   "OCPK" u32 version u64 step
//   str config_text
//   u32 n_components { str component u32 n_params { str name u32 rows u32 cols f32[rows*cols] } }
// where str is u32 length followed by bytes. Optimiser velocity is stored as
// extra components named "momentum.<component>".

inline constexpr std::uint32_t kCheckpointVersion = 1;

using ParamTable = std::map<std::string, std::map<std::string, Matrix<float>>>;

struct Checkpoint {
  std::uint64_t step = 0;
  std::string config_text;
  ParamTable tensors;
};

/// Raised when a checkpoint does not fit the model it is loaded into.
class CheckpointMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

ParamTable export_parameters(const Model<float>& model);
void import_parameters(Model<float>& model, const ParamTable& tensors);

Checkpoint make_checkpoint(const Model<float>& model, const MomentumSgd<float>* opt,
                           std::uint64_t step, std::string config_text);
/// Restores parameters and, when `opt` is given, velocity buffers.
void restore_checkpoint(const Checkpoint& ckpt, Model<float>& model, MomentumSgd<float>* opt);

}  // namespace occpose::nn
