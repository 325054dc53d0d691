// Copyright 2026 The TrajFlow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TRAJFLOW_MODEL_HPP_
#define TRAJFLOW_MODEL_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "trajflow/autoencoder.hpp"
#include "trajflow/flow.hpp"
#include "trajflow/params.hpp"
#include "trajflow/rng.hpp"
#include "trajflow/trajectory.hpp"

namespace trajflow {

// One decoded prediction with the model density of its encoding.
struct Prediction {
  std::vector<Vec2> points;
  double log_likelihood = 0.0;
};

// The full generative stack: a frozen-after-pretraining sequence
// autoencoder over future displacement rows, and a conditional flow over
// its encoding space conditioned on the observed past. Parameter stores
// are kept separate because the two halves train in separate phases.
class TrajFlowModel {
 public:
  // Requires flow.data_dim == ae.enc_size: the flow models exactly the
  // encoder output space.
  TrajFlowModel(AEConfig ae_cfg, FlowConfig flow_cfg, std::uint64_t seed);

  const AEConfig& ae_config() const { return ae_cfg_; }
  const FlowConfig& flow_config() const { return flow_cfg_; }
  std::uint64_t seed() const { return seed_; }

  const RnnAutoencoder& autoencoder() const { return ae_; }
  const ConditionalFlow& flow() const { return flow_; }

  ParamStore& ae_params() { return ae_params_; }
  const ParamStore& ae_params() const { return ae_params_; }
  ParamStore& flow_params() { return flow_params_; }
  const ParamStore& flow_params() const { return flow_params_; }

  FlowNorms& norms() { return norms_; }
  const FlowNorms& norms() const { return norms_; }

  // Draws fresh parameters for both halves from the model seed.
  void init_params();

  // N x enc_size encodings of the futures.
  Matrix encode_futures(std::span<const Situation> data) const;
  // N x context_dim context vectors from the pasts.
  Matrix contexts(std::span<const Situation> data) const;
  // Model log densities of the encoded futures given their pasts.
  Eigen::VectorXd data_log_prob(std::span<const Situation> data) const;

  // Samples n futures for one observed past: flow samples in encoding
  // space, the decoder turns them into displacement rows, and rows unroll
  // from the past's final position. The past length must equal t_past.
  std::vector<Prediction> predict_trajectories(const Trajectory& past, int n,
                                               Rng& rng) const;

 private:
  AEConfig ae_cfg_;
  FlowConfig flow_cfg_;
  std::uint64_t seed_;
  RnnAutoencoder ae_;
  ConditionalFlow flow_;
  ParamStore ae_params_;
  ParamStore flow_params_;
  FlowNorms norms_;
};

// Model directory layout: ae.ckpt.json + flow.ckpt.json. The flow
// checkpoint's extra field carries the standardization constants; its
// seed field carries the architecture seed.
inline const char* kAeCheckpointName = "ae.ckpt.json";
inline const char* kFlowCheckpointName = "flow.ckpt.json";

TrajFlowModel load_model(const std::filesystem::path& dir);

}  // namespace trajflow

#endif  // TRAJFLOW_MODEL_HPP_
