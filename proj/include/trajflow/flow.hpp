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

#ifndef TRAJFLOW_FLOW_HPP_
#define TRAJFLOW_FLOW_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "trajflow/gru.hpp"
#include "trajflow/json_util.hpp"
#include "trajflow/params.hpp"
#include "trajflow/rng.hpp"
#include "trajflow/rqspline.hpp"
#include "trajflow/tape.hpp"
#include "trajflow/trajectory.hpp"

namespace trajflow {

struct FlowConfig {
  int data_dim = 4;      // width of the modeled vectors
  int t_past = 10;       // observed steps fed to the context encoder
  int context_dim = 16;  // context GRU hidden size
  int ctx_gru_layers = 1;
  int n_layers = 10;     // coupling/permutation pairs
  int num_bins = 8;
  double tail_bound = 3.0;
  int cond_hidden = 32;  // conditioner MLP hidden width
  // "displacements": per-step deltas (translation invariant);
  // "positions": absolute coordinates (location aware).
  std::string past_mode = "displacements";

  int identity_dims() const { return data_dim / 2; }
  int transformed_dims() const { return data_dim - data_dim / 2; }

  RqsConfig spline() const {
    RqsConfig s;
    s.num_bins = num_bins;
    s.tail_bound = tail_bound;
    return s;
  }

  void validate() const;
  Json to_json() const;
  static FlowConfig from_json(const Json& doc);
};

// Input/output standardization constants. They are data statistics, not
// trainable parameters; fresh instances are identity maps.
struct FlowNorms {
  Eigen::RowVectorXd ctx_mean{Eigen::RowVectorXd::Zero(2)};
  Eigen::RowVectorXd ctx_std{Eigen::RowVectorXd::Ones(2)};
  Eigen::RowVectorXd lat_mean;  // sized data_dim on first fit
  Eigen::RowVectorXd lat_std;

  void ensure_sized(int data_dim);
  Json to_json() const;
  static FlowNorms from_json(const Json& doc);
};

// Conditional normalizing flow over fixed-width vectors: an input
// standardization affine, then n_layers of (rational-quadratic-spline
// coupling, fixed random permutation). The coupling conditioner is a
// two-layer tanh MLP over [untouched half, context]; its output layer
// starts at zero so every coupling begins as the identity. The base
// density is a standard normal.
//
// The forward direction maps data to the base space and is what training
// and log_prob use; sampling runs the exact inverse.
class ConditionalFlow {
 public:
  // The permutations are drawn deterministically from `seed`, so the same
  // (config, seed) pair always names the same architecture.
  ConditionalFlow(FlowConfig cfg, std::uint64_t seed);

  const FlowConfig& config() const { return cfg_; }
  const std::vector<std::vector<int>>& permutations() const { return perms_; }

  void create_params(ParamStore& store, Rng& rng) const;

  // Past-trajectory context. `past_rows` is N x (2 t_past), one
  // flattened point sequence per row, already in the representation named
  // by past_mode but not yet standardized; standardization happens inside
  // against `norms`.
  Matrix context(const ParamStore& store, const Matrix& past_rows,
                 const FlowNorms& norms) const;
  Var context(Tape& tape, ParamStore& store, Var past_rows,
              const FlowNorms& norms) const;

  // Data -> base transform with the per-sample log |det J| column.
  std::pair<Var, Var> forward(Tape& tape, ParamStore& store, Var y, Var ctx,
                              const FlowNorms& norms) const;
  // N x 1 column of log densities.
  Var log_prob(Tape& tape, ParamStore& store, Var y, Var ctx,
               const FlowNorms& norms) const;

  Eigen::VectorXd log_prob(const ParamStore& store, const Matrix& y,
                           const Matrix& ctx, const FlowNorms& norms) const;

  // Exact inverse of the forward transform: one base-space row per
  // context row back to data space.
  Matrix inverse(const ParamStore& store, const Matrix& z, const Matrix& ctx,
                 const FlowNorms& norms) const;

  // Draws one vector per context row by inverting the forward transform
  // on standard-normal noise.
  Matrix sample(const ParamStore& store, const Matrix& ctx,
                const FlowNorms& norms, Rng& rng) const;

 private:
  Matrix conditioner(const ParamStore& store, int layer,
                     const Matrix& identity_half, const Matrix& ctx) const;
  Var conditioner(Tape& tape, ParamStore& store, int layer,
                  Var identity_half, Var ctx) const;
  Var spline_forward_column(Tape& tape, Var x, Var raw_block,
                            Var* logdet) const;

  FlowConfig cfg_;
  Gru ctx_gru_;
  std::vector<std::vector<int>> perms_;
};

// Flattens pasts into context input rows per cfg.past_mode. Throws
// ShapeError when a past length differs from cfg.t_past.
Matrix past_context_rows(std::span<const Situation> data,
                         const FlowConfig& cfg);

// Fits ctx_mean/ctx_std (over all steps of all rows, per coordinate) and
// leaves the latent moments untouched.
void fit_context_norms(FlowNorms& norms, const Matrix& past_rows);

// Fits lat_mean/lat_std per column. Degenerate columns get unit scale.
void fit_latent_norms(FlowNorms& norms, const Matrix& encodings);

}  // namespace trajflow

#endif  // TRAJFLOW_FLOW_HPP_
