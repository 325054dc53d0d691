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

#include "trajflow/gru.hpp"

#include <cmath>
#include <utility>

#include "trajflow/errors.hpp"

namespace trajflow {

void uniform_init(Matrix& m, Rng& rng, double bound) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = rng.uniform(-bound, bound);
    }
  }
}

void create_linear(ParamStore& store, const std::string& name, int in,
                   int out, Rng& rng) {
  auto& w = store.create(name + ".w", in, out);
  uniform_init(w.value, rng, 1.0 / std::sqrt(static_cast<double>(in)));
  store.create(name + ".b", 1, out);
}

Var linear(Tape& tape, ParamStore& store, const std::string& name, Var x) {
  const Var w = tape.param(store, name + ".w");
  const Var b = tape.param(store, name + ".b");
  return tape.add_rowwise(tape.matmul(x, w), b);
}

Matrix linear(const ParamStore& store, const std::string& name,
              const Matrix& x) {
  Matrix out = x * store.at(name + ".w").value;
  out.rowwise() += store.at(name + ".b").value.row(0);
  return out;
}

namespace {

const char* const kWeightNames[] = {"wxr", "wxz", "wxn", "whr", "whz", "whn"};
const char* const kBiasNames[] = {"br", "bz", "bxn", "bhn"};

Matrix sigmoid_mat(const Matrix& x) {
  return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

}  // namespace

Gru::Gru(GruConfig cfg, std::string prefix)
    : cfg_(cfg), prefix_(std::move(prefix)) {
  if (cfg_.input_size <= 0 || cfg_.hidden_size <= 0 || cfg_.num_layers <= 0) {
    throw ConfigError("Gru: sizes must be positive");
  }
}

std::string Gru::layer_prefix(int layer) const {
  return prefix_ + ".l" + std::to_string(layer) + ".";
}

void Gru::create_params(ParamStore& store, Rng& rng) const {
  const double bound = 1.0 / std::sqrt(static_cast<double>(cfg_.hidden_size));
  for (int l = 0; l < cfg_.num_layers; ++l) {
    const int in = l == 0 ? cfg_.input_size : cfg_.hidden_size;
    const std::string p = layer_prefix(l);
    for (const char* name : kWeightNames) {
      const bool input_side = name[1] == 'x';
      auto& w = store.create(p + name, input_side ? in : cfg_.hidden_size,
                             cfg_.hidden_size);
      uniform_init(w.value, rng, bound);
    }
    for (const char* name : kBiasNames) {
      store.create(p + name, 1, cfg_.hidden_size);
    }
  }
}

std::vector<Matrix> Gru::make_state(Eigen::Index batch) const {
  return std::vector<Matrix>(
      static_cast<std::size_t>(cfg_.num_layers),
      Matrix::Zero(batch, cfg_.hidden_size));
}

Matrix Gru::step(const ParamStore& store, const Matrix& x,
                 std::vector<Matrix>& state) const {
  if (static_cast<int>(state.size()) != cfg_.num_layers) {
    throw ShapeError("Gru::step: state has the wrong number of layers");
  }
  Matrix input = x;
  for (int l = 0; l < cfg_.num_layers; ++l) {
    const std::string p = layer_prefix(l);
    const Matrix& h = state[std::size_t(l)];
    auto w = [&](const char* n) -> const Matrix& {
      return store.at(p + n).value;
    };
    const auto bias = [&](const char* n) { return w(n).row(0); };

    Matrix r = input * w("wxr") + h * w("whr");
    r.rowwise() += bias("br");
    r = sigmoid_mat(r);

    Matrix z = input * w("wxz") + h * w("whz");
    z.rowwise() += bias("bz");
    z = sigmoid_mat(z);

    Matrix hn = h * w("whn");
    hn.rowwise() += bias("bhn");
    Matrix n = input * w("wxn") + r.cwiseProduct(hn);
    n.rowwise() += bias("bxn");
    n = n.array().tanh();

    state[std::size_t(l)] =
        (Matrix::Ones(z.rows(), z.cols()) - z).cwiseProduct(n) +
        z.cwiseProduct(h);
    input = state[std::size_t(l)];
  }
  return input;
}

std::vector<Matrix> Gru::run(const ParamStore& store,
                             const std::vector<Matrix>& inputs,
                             std::vector<Matrix>* state) const {
  if (inputs.empty()) throw InvalidInput("Gru::run: empty sequence");
  std::vector<Matrix> local = make_state(inputs.front().rows());
  std::vector<Matrix>& s = state != nullptr ? *state : local;
  if (state != nullptr && state->empty()) *state = local;
  std::vector<Matrix> outputs;
  outputs.reserve(inputs.size());
  for (const Matrix& x : inputs) {
    outputs.push_back(step(store, x, s));
  }
  return outputs;
}

std::vector<Var> Gru::make_state(Tape& tape, Eigen::Index batch) const {
  std::vector<Var> state;
  for (int l = 0; l < cfg_.num_layers; ++l) {
    state.push_back(tape.zeros(batch, cfg_.hidden_size));
  }
  return state;
}

Var Gru::step(Tape& tape, ParamStore& store, Var x,
              std::vector<Var>& state) const {
  if (static_cast<int>(state.size()) != cfg_.num_layers) {
    throw ShapeError("Gru::step: state has the wrong number of layers");
  }
  Var input = x;
  for (int l = 0; l < cfg_.num_layers; ++l) {
    const std::string p = layer_prefix(l);
    const Var h = state[std::size_t(l)];
    auto w = [&](const char* n) { return tape.param(store, p + n); };

    const Var r = tape.sigmoid(tape.add_rowwise(
        tape.add(tape.matmul(input, w("wxr")), tape.matmul(h, w("whr"))),
        w("br")));
    const Var z = tape.sigmoid(tape.add_rowwise(
        tape.add(tape.matmul(input, w("wxz")), tape.matmul(h, w("whz"))),
        w("bz")));
    const Var hn =
        tape.add_rowwise(tape.matmul(h, w("whn")), w("bhn"));
    const Var n = tape.tanh(tape.add_rowwise(
        tape.add(tape.matmul(input, w("wxn")), tape.mul(r, hn)), w("bxn")));
    // (1 - z) * n + z * h  ==  n - z*n + z*h
    const Var h_new = tape.add(tape.sub(n, tape.mul(z, n)), tape.mul(z, h));
    state[std::size_t(l)] = h_new;
    input = h_new;
  }
  return input;
}

std::vector<Var> Gru::run(Tape& tape, ParamStore& store,
                          const std::vector<Var>& inputs,
                          std::vector<Var>* state) const {
  if (inputs.empty()) throw InvalidInput("Gru::run: empty sequence");
  std::vector<Var> local = make_state(tape, tape.value(inputs.front()).rows());
  std::vector<Var>& s = state != nullptr ? *state : local;
  if (state != nullptr && state->empty()) *state = local;
  std::vector<Var> outputs;
  outputs.reserve(inputs.size());
  for (Var x : inputs) {
    outputs.push_back(step(tape, store, x, s));
  }
  return outputs;
}

}  // namespace trajflow
