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
#include <limits>

#include "trajflow/adam.hpp"
#include "trajflow/params.hpp"
#include "trajflow/tape.hpp"

using trajflow::Adam;
using trajflow::AdamConfig;
using trajflow::Matrix;
using trajflow::ParamStore;

TEST_CASE("first step moves by about the learning rate") {
  ParamStore store;
  store.create("w", 1, 1).value(0, 0) = 1.0;
  store.at("w").grad(0, 0) = 7.5;

  AdamConfig cfg;
  cfg.lr = 0.01;
  Adam opt(cfg);
  REQUIRE(opt.step(store));
  // With bias correction the first update is lr * g / (|g| + eps).
  CHECK(store.at("w").value(0, 0) == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
  CHECK(opt.steps() == 1);
}

TEST_CASE("adam minimizes a quadratic") {
  ParamStore store;
  store.create("x", 1, 1).value(0, 0) = -4.0;

  AdamConfig cfg;
  cfg.lr = 0.05;
  Adam opt(cfg);
  for (int i = 0; i < 2000; ++i) {
    store.zero_grad();
    const double x = store.at("x").value(0, 0);
    store.at("x").grad(0, 0) = 2.0 * (x - 3.0);
    REQUIRE(opt.step(store));
  }
  CHECK(store.at("x").value(0, 0) == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("non-finite gradients leave parameters untouched") {
  ParamStore store;
  store.create("w", 2, 2).value = Matrix::Ones(2, 2);
  store.at("w").grad.setConstant(std::numeric_limits<double>::quiet_NaN());

  Adam opt;
  CHECK_FALSE(opt.step(store));
  CHECK(opt.steps() == 0);
  CHECK((store.at("w").value - Matrix::Ones(2, 2)).norm() == 0.0);
}

TEST_CASE("serialized state resumes the exact trajectory") {
  auto grad_at = [](double x) { return std::cos(3.0 * x) + 0.2 * x; };

  ParamStore a;
  a.create("x", 1, 1).value(0, 0) = 0.7;
  Adam opt_a;
  for (int i = 0; i < 50; ++i) {
    a.zero_grad();
    a.at("x").grad(0, 0) = grad_at(a.at("x").value(0, 0));
    opt_a.step(a);
  }

  // Split the same run into 20 + 30 steps with a JSON round trip between.
  ParamStore b;
  b.create("x", 1, 1).value(0, 0) = 0.7;
  Adam opt_b1;
  for (int i = 0; i < 20; ++i) {
    b.zero_grad();
    b.at("x").grad(0, 0) = grad_at(b.at("x").value(0, 0));
    opt_b1.step(b);
  }
  const trajflow::Json state = opt_b1.state_to_json();
  Adam opt_b2;
  opt_b2.state_from_json(state);
  CHECK(opt_b2.steps() == 20);
  for (int i = 0; i < 30; ++i) {
    b.zero_grad();
    b.at("x").grad(0, 0) = grad_at(b.at("x").value(0, 0));
    opt_b2.step(b);
  }

  CHECK(a.at("x").value(0, 0) == b.at("x").value(0, 0));
}
