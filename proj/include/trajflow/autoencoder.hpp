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

#ifndef TRAJFLOW_AUTOENCODER_HPP_
#define TRAJFLOW_AUTOENCODER_HPP_

#include <span>
#include <vector>

#include "trajflow/gru.hpp"
#include "trajflow/json_util.hpp"
#include "trajflow/params.hpp"
#include "trajflow/rng.hpp"
#include "trajflow/tape.hpp"
#include "trajflow/trajectory.hpp"

namespace trajflow {

struct AEConfig {
  int t_pred = 14;
  int em_size = 4;
  int enc_size = 4;
  int gru_hidden = 4;
  int gru_layers = 3;

  // Throws ConfigError; the decoder feeds its hidden state back through
  // the input layer, which requires enc_size == gru_hidden.
  void validate() const;

  Json to_json() const;
  static AEConfig from_json(const Json& doc);
};

// Sequence autoencoder over future trajectories, represented as
// displacement rows: row n is [dx0, dy0, dx1, dy1, ...] with 2 * t_pred
// columns, anchored at the situation's current position.
//
// Encoder: per-step linear embedding, stacked GRU, then a linear read-out
// of the last step's top hidden state. Decoder: autoregressive; the
// encoding is the first input, each later input is the previous top
// hidden state, both passed through a shared input layer, and a linear
// head emits one displacement per step.
class RnnAutoencoder {
 public:
  explicit RnnAutoencoder(AEConfig cfg);

  const AEConfig& config() const { return cfg_; }

  void create_params(ParamStore& store, Rng& rng) const;

  // N x (2 t_pred) displacement rows -> N x enc_size encodings.
  Matrix encode(const ParamStore& store, const Matrix& future_rows) const;
  // N x enc_size encodings -> N x (2 t_pred) displacement rows.
  Matrix decode(const ParamStore& store, const Matrix& encodings) const;

  Var encode(Tape& tape, ParamStore& store, Var future_rows) const;
  Var decode(Tape& tape, ParamStore& store, Var encodings) const;

  // Mean squared error between the input rows and their reconstruction.
  Var reconstruction_loss(Tape& tape, ParamStore& store,
                          Var future_rows) const;

 private:
  void check_rows(Eigen::Index cols) const;

  AEConfig cfg_;
  Gru enc_gru_;
  Gru dec_gru_;
};

// Flattens each situation's future into one displacement row anchored at
// its current position. Throws ShapeError when a future length differs
// from t_pred.
Matrix future_displacement_rows(std::span<const Situation> data, int t_pred);

// Inverse of one row: cumulative sum from the current position.
std::vector<Vec2> displacement_row_to_points(const Eigen::RowVectorXd& row,
                                             const Vec2& current);

}  // namespace trajflow

#endif  // TRAJFLOW_AUTOENCODER_HPP_
