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

#include "trajflow/model.hpp"

#include <utility>

#include "trajflow/checkpoint.hpp"
#include "trajflow/errors.hpp"

namespace trajflow {

TrajFlowModel::TrajFlowModel(AEConfig ae_cfg, FlowConfig flow_cfg,
                             std::uint64_t seed)
    : ae_cfg_(ae_cfg),
      flow_cfg_(flow_cfg),
      seed_(seed),
      ae_(ae_cfg),
      flow_(flow_cfg, seed) {
  if (flow_cfg_.data_dim != ae_cfg_.enc_size) {
    throw ConfigError(
        "model: flow data_dim must equal autoencoder enc_size");
  }
  norms_.ensure_sized(flow_cfg_.data_dim);
}

void TrajFlowModel::init_params() {
  ae_params_ = ParamStore();
  flow_params_ = ParamStore();
  Rng ae_rng = Rng::substream(seed_, "init.ae");
  Rng flow_rng = Rng::substream(seed_, "init.flow");
  ae_.create_params(ae_params_, ae_rng);
  flow_.create_params(flow_params_, flow_rng);
}

Matrix TrajFlowModel::encode_futures(std::span<const Situation> data) const {
  return ae_.encode(ae_params_,
                    future_displacement_rows(data, ae_cfg_.t_pred));
}

Matrix TrajFlowModel::contexts(std::span<const Situation> data) const {
  return flow_.context(flow_params_, past_context_rows(data, flow_cfg_),
                       norms_);
}

Eigen::VectorXd TrajFlowModel::data_log_prob(
    std::span<const Situation> data) const {
  return flow_.log_prob(flow_params_, encode_futures(data), contexts(data),
                        norms_);
}

std::vector<Prediction> TrajFlowModel::predict_trajectories(
    const Trajectory& past, int n, Rng& rng) const {
  if (n <= 0) throw InvalidInput("predict_trajectories: n must be positive");
  Situation probe;
  probe.past = past;
  const Matrix one_ctx =
      flow_.context(flow_params_, past_context_rows({&probe, 1}, flow_cfg_),
                    norms_);
  const Matrix ctx = one_ctx.replicate(n, 1);

  const Matrix enc = flow_.sample(flow_params_, ctx, norms_, rng);
  const Eigen::VectorXd ll = flow_.log_prob(flow_params_, enc, ctx, norms_);
  const Matrix rows = ae_.decode(ae_params_, enc);

  std::vector<Prediction> out;
  out.reserve(std::size_t(n));
  const Vec2& current = past.points.back();
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    Prediction p;
    p.points = displacement_row_to_points(rows.row(r), current);
    p.log_likelihood = ll[r];
    out.push_back(std::move(p));
  }
  return out;
}

TrajFlowModel load_model(const std::filesystem::path& dir) {
  const Checkpoint ae_ckpt =
      load_checkpoint(dir / kAeCheckpointName, "rnn_ae");
  const Checkpoint flow_ckpt =
      load_checkpoint(dir / kFlowCheckpointName, "flow");

  TrajFlowModel model(AEConfig::from_json(ae_ckpt.config),
                      FlowConfig::from_json(flow_ckpt.config),
                      flow_ckpt.seed);
  model.ae_params() = ae_ckpt.params;
  model.flow_params() = flow_ckpt.params;
  if (!flow_ckpt.extra.contains("norms")) {
    throw ConfigError("model: flow checkpoint lacks standardization norms");
  }
  model.norms() = FlowNorms::from_json(flow_ckpt.extra.at("norms"));
  return model;
}

}  // namespace trajflow
