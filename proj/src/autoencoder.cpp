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

#include "trajflow/autoencoder.hpp"

#include <string>

#include "trajflow/errors.hpp"
#include "trajflow/nn.hpp"

namespace trajflow {

void AEConfig::validate() const {
  if (t_pred <= 0) throw ConfigError("autoencoder: t_pred must be positive");
  if (em_size <= 0 || enc_size <= 0 || gru_hidden <= 0 || gru_layers <= 0) {
    throw ConfigError("autoencoder: sizes must be positive");
  }
  if (enc_size != gru_hidden) {
    throw ConfigError(
        "autoencoder: enc_size must equal gru_hidden (the decoder feeds "
        "hidden states back through its input layer)");
  }
}

Json AEConfig::to_json() const {
  return Json{{"t_pred", t_pred},
              {"em_size", em_size},
              {"enc_size", enc_size},
              {"gru_hidden", gru_hidden},
              {"gru_layers", gru_layers}};
}

AEConfig AEConfig::from_json(const Json& doc) {
  AEConfig cfg;
  cfg.t_pred = doc.value("t_pred", cfg.t_pred);
  cfg.em_size = doc.value("em_size", cfg.em_size);
  cfg.enc_size = doc.value("enc_size", cfg.enc_size);
  cfg.gru_hidden = doc.value("gru_hidden", cfg.gru_hidden);
  cfg.gru_layers = doc.value("gru_layers", cfg.gru_layers);
  cfg.validate();
  return cfg;
}

RnnAutoencoder::RnnAutoencoder(AEConfig cfg)
    : cfg_(cfg),
      enc_gru_(GruConfig{cfg.em_size, cfg.gru_hidden, cfg.gru_layers},
               "ae.enc_gru"),
      dec_gru_(GruConfig{cfg.enc_size, cfg.gru_hidden, cfg.gru_layers},
               "ae.dec_gru") {
  cfg_.validate();
}

void RnnAutoencoder::create_params(ParamStore& store, Rng& rng) const {
  create_linear(store, "ae.embed", 2, cfg_.em_size, rng);
  enc_gru_.create_params(store, rng);
  create_linear(store, "ae.enc_out", cfg_.gru_hidden, cfg_.enc_size, rng);
  create_linear(store, "ae.dec_in", cfg_.enc_size, cfg_.enc_size, rng);
  dec_gru_.create_params(store, rng);
  create_linear(store, "ae.dec_out", cfg_.gru_hidden, 2, rng);
}

void RnnAutoencoder::check_rows(Eigen::Index cols) const {
  if (cols != 2 * cfg_.t_pred) {
    throw ShapeError("autoencoder: expected rows of 2 * t_pred = " +
                     std::to_string(2 * cfg_.t_pred) + " columns, got " +
                     std::to_string(cols));
  }
}

Matrix RnnAutoencoder::encode(const ParamStore& store,
                              const Matrix& future_rows) const {
  check_rows(future_rows.cols());
  std::vector<Matrix> state = enc_gru_.make_state(future_rows.rows());
  Matrix last;
  for (int k = 0; k < cfg_.t_pred; ++k) {
    const Matrix emb =
        linear(store, "ae.embed", future_rows.middleCols(2 * k, 2));
    last = enc_gru_.step(store, emb, state);
  }
  return linear(store, "ae.enc_out", last);
}

Matrix RnnAutoencoder::decode(const ParamStore& store,
                              const Matrix& encodings) const {
  if (encodings.cols() != cfg_.enc_size) {
    throw ShapeError("autoencoder: encodings must have enc_size columns");
  }
  std::vector<Matrix> state = dec_gru_.make_state(encodings.rows());
  Matrix out(encodings.rows(), 2 * cfg_.t_pred);
  Matrix input = encodings;
  for (int k = 0; k < cfg_.t_pred; ++k) {
    const Matrix u = linear(store, "ae.dec_in", input);
    const Matrix h = dec_gru_.step(store, u, state);
    out.middleCols(2 * k, 2) = linear(store, "ae.dec_out", h);
    input = h;
  }
  return out;
}

Var RnnAutoencoder::encode(Tape& tape, ParamStore& store,
                           Var future_rows) const {
  check_rows(tape.value(future_rows).cols());
  std::vector<Var> state =
      enc_gru_.make_state(tape, tape.value(future_rows).rows());
  Var last{};
  for (int k = 0; k < cfg_.t_pred; ++k) {
    const Var emb = linear(tape, store, "ae.embed",
                           tape.slice_cols(future_rows, 2 * k, 2));
    last = enc_gru_.step(tape, store, emb, state);
  }
  return linear(tape, store, "ae.enc_out", last);
}

Var RnnAutoencoder::decode(Tape& tape, ParamStore& store,
                           Var encodings) const {
  if (tape.value(encodings).cols() != cfg_.enc_size) {
    throw ShapeError("autoencoder: encodings must have enc_size columns");
  }
  std::vector<Var> state =
      dec_gru_.make_state(tape, tape.value(encodings).rows());
  std::vector<Var> steps;
  steps.reserve(static_cast<std::size_t>(cfg_.t_pred));
  Var input = encodings;
  for (int k = 0; k < cfg_.t_pred; ++k) {
    const Var u = linear(tape, store, "ae.dec_in", input);
    const Var h = dec_gru_.step(tape, store, u, state);
    steps.push_back(linear(tape, store, "ae.dec_out", h));
    input = h;
  }
  return tape.concat_cols(steps);
}

Var RnnAutoencoder::reconstruction_loss(Tape& tape, ParamStore& store,
                                        Var future_rows) const {
  const Var rebuilt = decode(tape, store, encode(tape, store, future_rows));
  return tape.mean(tape.square(tape.sub(rebuilt, future_rows)));
}

Matrix future_displacement_rows(std::span<const Situation> data,
                                int t_pred) {
  Matrix rows(static_cast<Eigen::Index>(data.size()), 2 * t_pred);
  for (std::size_t n = 0; n < data.size(); ++n) {
    const Situation& s = data[n];
    if (static_cast<int>(s.future.points.size()) != t_pred) {
      throw ShapeError("future_displacement_rows: future length " +
                       std::to_string(s.future.points.size()) +
                       " does not match t_pred " + std::to_string(t_pred));
    }
    const DisplacementSeries d =
        to_displacements(s.future, s.current_position());
    for (int k = 0; k < t_pred; ++k) {
      rows(static_cast<Eigen::Index>(n), 2 * k) = d.deltas[std::size_t(k)].x;
      rows(static_cast<Eigen::Index>(n), 2 * k + 1) =
          d.deltas[std::size_t(k)].y;
    }
  }
  return rows;
}

std::vector<Vec2> displacement_row_to_points(const Eigen::RowVectorXd& row,
                                             const Vec2& current) {
  DisplacementSeries d;
  d.origin = current;
  const int t = static_cast<int>(row.size() / 2);
  d.deltas.reserve(static_cast<std::size_t>(t));
  for (int k = 0; k < t; ++k) {
    d.deltas.push_back({row[2 * k], row[2 * k + 1]});
  }
  return from_displacements(d);
}

}  // namespace trajflow
