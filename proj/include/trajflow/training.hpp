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

#ifndef TRAJFLOW_TRAINING_HPP_
#define TRAJFLOW_TRAINING_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "trajflow/autoencoder.hpp"
#include "trajflow/flow.hpp"
#include "trajflow/json_util.hpp"
#include "trajflow/params.hpp"
#include "trajflow/trajectory.hpp"

namespace trajflow {

// Everything a reproducible run needs. The dataset path is part of the
// config on purpose: one file fully names one training run.
struct TrainConfig {
  std::string dataset;  // NDJSON dataset path
  std::string out_dir;  // receives checkpoints and the training log
  std::uint64_t seed = 1;

  AEConfig ae;
  FlowConfig flow;

  int batch_size = 64;
  double grad_clip = 10.0;

  double ae_lr = 1e-3;
  int ae_max_epochs = 500;
  int ae_patience = 25;

  double flow_lr = 1e-3;
  int flow_max_epochs = 1000;
  int flow_patience = 50;

  void validate() const;
  Json to_json() const;
  static TrainConfig from_json(const Json& doc);
  static TrainConfig load(const std::filesystem::path& path);

  std::string hash() const { return json_hash(to_json()); }
};

// Negative mean flow log density of the encoded batch. Throws
// InvalidInput on an empty batch and NumericalError when the result is
// not finite.
double nll_loss(const ConditionalFlow& flow, const ParamStore& params,
                const Matrix& encodings, const Matrix& ctx,
                const FlowNorms& norms);

// Mean squared error of the autoencoder reconstruction, computed without
// a tape (used for end-of-epoch evaluation).
double reconstruction_mse(const RnnAutoencoder& ae, const ParamStore& params,
                          const Matrix& future_rows);

struct PhaseResult {
  std::filesystem::path checkpoint;  // published best-parameter checkpoint
  double best_loss = 0.0;
  int best_epoch = -1;
  int epochs_run = 0;
};

struct TrainResult {
  PhaseResult ae;
  PhaseResult flow;
  std::filesystem::path log_path;
};

// Two-phase pipeline: phase 1 trains the autoencoder on mode-balanced
// data and publishes the best epoch; phase 2 freezes it, encodes every
// future, fits the standardization constants, and trains the flow by NLL.
// Per-epoch losses go to <out_dir>/training_log.csv with columns
// phase,epoch,loss,wall_time_s. All checkpoint writes are atomic.
//
// With `resume` set, a run continues from <phase>.state.json work files
// and reproduces exactly the epochs an uninterrupted run would have done.
// Throws TrainingError (carrying the last checkpoint path) on divergence.
TrainResult train_pipeline(const TrainConfig& cfg, bool resume = false);

}  // namespace trajflow

#endif  // TRAJFLOW_TRAINING_HPP_
