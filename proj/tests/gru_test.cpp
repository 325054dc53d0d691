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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "trajflow/grad_check.hpp"
#include "trajflow/gru.hpp"
#include "trajflow/params.hpp"
#include "trajflow/rng.hpp"
#include "trajflow/tape.hpp"

using trajflow::Gru;
using trajflow::GruConfig;
using trajflow::Matrix;
using trajflow::ParamStore;
using trajflow::Rng;
using trajflow::Tape;
using trajflow::Var;

namespace {

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.normal();
  }
  return m;
}

}  // namespace

TEST_CASE("single cell matches a scalar hand computation") {
  // One layer, one unit, scalar input: every matrix is 1 x 1 and the cell
  // reduces to the textbook scalar update.
  GruConfig cfg{1, 1, 1};
  Gru gru(cfg, "g");
  ParamStore store;
  Rng rng(0);
  gru.create_params(store, rng);

  const double wxr = 0.3, whr = -0.4, br = 0.1;
  const double wxz = -0.2, whz = 0.5, bz = -0.3;
  const double wxn = 0.7, whn = 0.2, bxn = 0.05, bhn = -0.15;
  store.at("g.l0.wxr").value(0, 0) = wxr;
  store.at("g.l0.whr").value(0, 0) = whr;
  store.at("g.l0.br").value(0, 0) = br;
  store.at("g.l0.wxz").value(0, 0) = wxz;
  store.at("g.l0.whz").value(0, 0) = whz;
  store.at("g.l0.bz").value(0, 0) = bz;
  store.at("g.l0.wxn").value(0, 0) = wxn;
  store.at("g.l0.whn").value(0, 0) = whn;
  store.at("g.l0.bxn").value(0, 0) = bxn;
  store.at("g.l0.bhn").value(0, 0) = bhn;

  const double x = 0.8, h = -0.6;
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  const double r = sig(x * wxr + h * whr + br);
  const double z = sig(x * wxz + h * whz + bz);
  const double n = std::tanh(x * wxn + bxn + r * (h * whn + bhn));
  const double expected = (1.0 - z) * n + z * h;

  std::vector<Matrix> state{Matrix::Constant(1, 1, h)};
  Matrix xin = Matrix::Constant(1, 1, x);
  const Matrix out = gru.step(store, xin, state);
  CHECK(out(0, 0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("tape and plain paths agree") {
  GruConfig cfg{3, 5, 2};
  Gru gru(cfg, "g");
  ParamStore store;
  Rng rng(21);
  gru.create_params(store, rng);

  Rng data_rng(99);
  std::vector<Matrix> inputs;
  for (int tstep = 0; tstep < 6; ++tstep) {
    inputs.push_back(random_matrix(data_rng, 4, 3));
  }

  const auto plain = gru.run(store, inputs);

  Tape tape;
  std::vector<Var> vin;
  for (const auto& m : inputs) vin.push_back(tape.constant(m));
  const auto taped = gru.run(tape, store, vin);

  REQUIRE(plain.size() == taped.size());
  for (std::size_t i = 0; i < plain.size(); ++i) {
    CHECK((plain[i] - tape.value(taped[i])).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("gradients through a stacked sequence match finite differences") {
  GruConfig cfg{2, 3, 2};
  Gru gru(cfg, "g");
  ParamStore store;
  Rng rng(4);
  gru.create_params(store, rng);

  Rng data_rng(5);
  std::vector<Matrix> inputs;
  for (int tstep = 0; tstep < 4; ++tstep) {
    inputs.push_back(random_matrix(data_rng, 3, 2));
  }

  auto run = [&](bool grad) {
    Tape tape;
    std::vector<Var> vin;
    for (const auto& m : inputs) vin.push_back(tape.constant(m));
    const auto outs = gru.run(tape, store, vin);
    const Var loss = tape.mean(tape.square(outs.back()));
    if (grad) tape.backward(loss);
    return tape.value(loss)(0, 0);
  };

  store.zero_grad();
  run(true);
  const auto res = trajflow::finite_diff_check(
      store, [&]() { return run(false); }, 1e-5);
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("every layer parameter exists with the documented shape") {
  GruConfig cfg{7, 4, 3};
  Gru gru(cfg, "enc");
  ParamStore store;
  Rng rng(1);
  gru.create_params(store, rng);

  CHECK(store.at("enc.l0.wxr").value.rows() == 7);
  CHECK(store.at("enc.l1.wxr").value.rows() == 4);
  CHECK(store.at("enc.l2.whn").value.rows() == 4);
  CHECK(store.at("enc.l2.whn").value.cols() == 4);
  CHECK(store.at("enc.l0.br").value.rows() == 1);
  CHECK(store.at("enc.l0.br").value.norm() == 0.0);  // biases start at zero
  // 6 weight matrices + 4 biases per layer.
  CHECK(store.size() == 3 * 10);
}

TEST_CASE("deterministic initialization") {
  GruConfig cfg{2, 3, 1};
  ParamStore a, b;
  Rng ra(12), rb(12);
  Gru(cfg, "g").create_params(a, ra);
  Gru(cfg, "g").create_params(b, rb);
  CHECK((a.at("g.l0.wxn").value - b.at("g.l0.wxn").value).norm() == 0.0);
}
