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

#ifndef TRAJFLOW_GRU_HPP_
#define TRAJFLOW_GRU_HPP_

#include <string>
#include <vector>

#include "trajflow/nn.hpp"
#include "trajflow/params.hpp"
#include "trajflow/rng.hpp"
#include "trajflow/tape.hpp"

namespace trajflow {

struct GruConfig {
  int input_size = 0;
  int hidden_size = 0;
  int num_layers = 1;
};

// Stacked gated recurrent unit over batched row-vector inputs, with the
// update equations
//   r = sigmoid(x Wxr + h Whr + br)
//   z = sigmoid(x Wxz + h Whz + bz)
//   n = tanh(x Wxn + bxn + r * (h Whn + bhn))
//   h' = (1 - z) * n + z * h
// implemented twice: a plain Eigen path for inference and a Tape path for
// training. Both share the same ParamStore entries, named
// `<prefix>.l<k>.<wxr|wxz|wxn|whr|whz|whn|br|bz|bxn|bhn>`.
class Gru {
 public:
  Gru(GruConfig cfg, std::string prefix);

  const GruConfig& config() const { return cfg_; }

  // Creates all parameters with U(+-1/sqrt(hidden_size)) weights and zero
  // biases, drawn in a fixed order.
  void create_params(ParamStore& store, Rng& rng) const;

  // One time step through all layers. `state` holds one N x H matrix per
  // layer (zeros to start) and is updated in place. Returns the last
  // layer's new hidden state.
  Matrix step(const ParamStore& store, const Matrix& x,
              std::vector<Matrix>& state) const;

  // Runs a whole sequence; returns the last layer's hidden state at every
  // step.
  std::vector<Matrix> run(const ParamStore& store,
                          const std::vector<Matrix>& inputs,
                          std::vector<Matrix>* state = nullptr) const;

  std::vector<Matrix> make_state(Eigen::Index batch) const;

  // Tape twins of the above.
  Var step(Tape& tape, ParamStore& store, Var x,
           std::vector<Var>& state) const;
  std::vector<Var> run(Tape& tape, ParamStore& store,
                       const std::vector<Var>& inputs,
                       std::vector<Var>* state = nullptr) const;
  std::vector<Var> make_state(Tape& tape, Eigen::Index batch) const;

 private:
  std::string layer_prefix(int layer) const;

  GruConfig cfg_;
  std::string prefix_;
};

}  // namespace trajflow

#endif  // TRAJFLOW_GRU_HPP_
