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
#include <set>
#include <vector>

#include "trajflow/errors.hpp"
#include "trajflow/flow.hpp"
#include "trajflow/grad_check.hpp"
#include "trajflow/params.hpp"
#include "trajflow/rng.hpp"
#include "trajflow/tape.hpp"

using trajflow::ConditionalFlow;
using trajflow::ConfigError;
using trajflow::FlowConfig;
using trajflow::FlowNorms;
using trajflow::InvalidInput;
using trajflow::Matrix;
using trajflow::ParamStore;
using trajflow::Rng;
using trajflow::ShapeError;
using trajflow::Situation;
using trajflow::Tape;
using trajflow::Var;
using trajflow::Vec2;

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c,
                     double scale = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = scale * rng.normal();
  }
  return m;
}

FlowConfig small_config() {
  FlowConfig cfg;
  cfg.data_dim = 2;
  cfg.t_past = 3;
  cfg.context_dim = 3;
  cfg.ctx_gru_layers = 1;
  cfg.n_layers = 2;
  cfg.num_bins = 4;
  cfg.cond_hidden = 6;
  return cfg;
}

// Fresh conditioners output exactly zero; nudging their parameters makes
// the couplings genuinely non-linear so tests exercise the real math.
void perturb_conditioners(ParamStore& store, Rng& rng, double scale) {
  for (auto& [name, tensor] : store) {
    if (name.rfind("flow.c", 0) == 0) {
      for (Eigen::Index i = 0; i < tensor.value.size(); ++i) {
        tensor.value.data()[i] += scale * rng.normal();
      }
    }
  }
}

Situation make_situation(Rng& rng, int t_past, int t_future) {
  Situation s;
  Vec2 p{rng.normal(), rng.normal()};
  for (int k = 0; k < t_past; ++k) {
    s.past.points.push_back(p);
    p.x += 0.3 * rng.normal();
    p.y += 0.3 * rng.normal();
  }
  for (int k = 0; k < t_future; ++k) {
    s.future.points.push_back(p);
    p.x += 0.3 * rng.normal();
    p.y += 0.3 * rng.normal();
  }
  return s;
}

}  // namespace

TEST_CASE("flow config validates and round-trips through json") {
  FlowConfig cfg;
  CHECK_NOTHROW(cfg.validate());

  const FlowConfig back = FlowConfig::from_json(cfg.to_json());
  CHECK(back.data_dim == cfg.data_dim);
  CHECK(back.t_past == cfg.t_past);
  CHECK(back.context_dim == cfg.context_dim);
  CHECK(back.n_layers == cfg.n_layers);
  CHECK(back.num_bins == cfg.num_bins);
  CHECK(back.tail_bound == cfg.tail_bound);
  CHECK(back.cond_hidden == cfg.cond_hidden);
  CHECK(back.past_mode == cfg.past_mode);

  FlowConfig bad = cfg;
  bad.data_dim = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.past_mode = "velocity";
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.tail_bound = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.n_layers = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("flow norms round-trip through json") {
  FlowNorms norms;
  norms.ctx_mean << 1.5, -2.25;
  norms.ctx_std << 0.5, 4.0;
  norms.ensure_sized(3);
  norms.lat_mean << 0.1, 0.2, 0.3;

  const FlowNorms back = FlowNorms::from_json(norms.to_json());
  CHECK(back.ctx_mean == norms.ctx_mean);
  CHECK(back.ctx_std == norms.ctx_std);
  CHECK(back.lat_mean == norms.lat_mean);
  CHECK(back.lat_std == norms.lat_std);
}

TEST_CASE("permutations are seeded, valid, and never the identity") {
  FlowConfig cfg;
  const ConditionalFlow a(cfg, 11);
  const ConditionalFlow b(cfg, 11);
  const ConditionalFlow c(cfg, 12);

  REQUIRE(a.permutations().size() == std::size_t(cfg.n_layers));
  CHECK(a.permutations() == b.permutations());
  CHECK(a.permutations() != c.permutations());

  for (const auto& p : a.permutations()) {
    std::set<int> seen(p.begin(), p.end());
    CHECK(seen.size() == std::size_t(cfg.data_dim));
    CHECK(*seen.begin() == 0);
    bool identity = true;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] != int(i)) identity = false;
    }
    CHECK_FALSE(identity);
  }
}

TEST_CASE("fresh flow is the identity: log_prob equals the standard normal") {
  FlowConfig cfg;  // data_dim 4
  const ConditionalFlow flow(cfg, 3);
  ParamStore store;
  Rng rng(5);
  flow.create_params(store, rng);
  FlowNorms norms;
  norms.ensure_sized(cfg.data_dim);

  Rng drng(17);
  const Matrix past = random_matrix(drng, 5, 2 * cfg.t_past, 0.4);
  const Matrix ctx = flow.context(store, past, norms);

  Matrix y(5, 4);
  y.row(0).setZero();
  y.row(1) << 1.0, -0.5, 0.25, 2.0;
  y.row(2) << -2.9, 2.9, 0.1, -0.1;
  y.row(3) << 5.0, -7.0, 0.0, 1.0;  // beyond the spline box: identity tails
  y.row(4) << 0.5, 0.5, 0.5, 0.5;

  const Eigen::VectorXd lp = flow.log_prob(store, y, ctx, norms);
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    const double expected =
        -0.5 * y.row(r).squaredNorm() - 0.5 * kLog2Pi * cfg.data_dim;
    CHECK(lp[r] == doctest::Approx(expected).epsilon(1e-9));
  }
  // Frozen value at the origin for a four-dimensional standard normal.
  CHECK(lp[0] == doctest::Approx(-2.0 * kLog2Pi).epsilon(1e-12));
}

TEST_CASE("fresh flow samples are column-shuffled base draws") {
  // Identity couplings leave only the fixed permutations, so every sample
  // must be its base draw with columns moved by the composite permutation.
  FlowConfig cfg;
  const ConditionalFlow flow(cfg, 3);
  ParamStore store;
  Rng rng(5);
  flow.create_params(store, rng);
  FlowNorms norms;
  norms.ensure_sized(cfg.data_dim);

  std::vector<int> comp(std::size_t(cfg.data_dim));
  for (int c = 0; c < cfg.data_dim; ++c) comp[std::size_t(c)] = c;
  for (const auto& p : flow.permutations()) {
    std::vector<int> next(comp.size());
    for (std::size_t c = 0; c < comp.size(); ++c) {
      next[c] = comp[std::size_t(p[c])];
    }
    comp = next;
  }

  Rng drng(17);
  const Matrix past = random_matrix(drng, 6, 2 * cfg.t_past, 0.4);
  const Matrix ctx = flow.context(store, past, norms);

  Rng expect_rng(99);
  Matrix base(6, cfg.data_dim);
  for (Eigen::Index r = 0; r < 6; ++r) {
    for (int c = 0; c < cfg.data_dim; ++c) base(r, c) = expect_rng.normal();
  }
  Rng sample_rng(99);
  const Matrix got = flow.sample(store, ctx, norms, sample_rng);
  for (Eigen::Index r = 0; r < 6; ++r) {
    for (int c = 0; c < cfg.data_dim; ++c) {
      CHECK(got(r, comp[std::size_t(c)]) ==
            doctest::Approx(base(r, c)).epsilon(1e-10));
    }
  }
}

TEST_CASE("tape and plain log_prob agree on a perturbed model") {
  FlowConfig cfg = small_config();
  const ConditionalFlow flow(cfg, 21);
  ParamStore store;
  Rng rng(22);
  flow.create_params(store, rng);
  perturb_conditioners(store, rng, 0.8);

  FlowNorms norms;
  norms.ensure_sized(cfg.data_dim);
  norms.lat_mean << 0.2, -0.1;
  norms.lat_std << 1.3, 0.7;
  norms.ctx_mean << 0.05, -0.05;
  norms.ctx_std << 0.5, 0.8;

  Rng drng(23);
  const Matrix past = random_matrix(drng, 7, 2 * cfg.t_past, 0.5);
  Matrix y = random_matrix(drng, 7, cfg.data_dim, 1.2);
  y(6, 0) = 9.0;  // exercise the identity tails
  y(6, 1) = -8.0;

  const Matrix ctx_plain = flow.context(store, past, norms);

  Tape tape;
  const Var vpast = tape.constant(past);
  const Var vctx = flow.context(tape, store, vpast, norms);
  CHECK((tape.value(vctx) - ctx_plain).cwiseAbs().maxCoeff() < 1e-12);

  const Var vy = tape.constant(y);
  const Var vlp = flow.log_prob(tape, store, vy, vctx, norms);
  const Eigen::VectorXd lp_plain = flow.log_prob(store, y, ctx_plain, norms);

  REQUIRE(tape.value(vlp).rows() == 7);
  for (Eigen::Index r = 0; r < 7; ++r) {
    CHECK(tape.value(vlp)(r, 0) ==
          doctest::Approx(lp_plain[r]).epsilon(1e-10));
  }
}

TEST_CASE("sampling inverts the forward transform exactly") {
  FlowConfig cfg = small_config();
  cfg.data_dim = 4;
  const ConditionalFlow flow(cfg, 31);
  ParamStore store;
  Rng rng(32);
  flow.create_params(store, rng);
  perturb_conditioners(store, rng, 0.6);

  FlowNorms norms;
  norms.ensure_sized(cfg.data_dim);
  norms.lat_mean << 0.3, -0.2, 0.0, 0.1;
  norms.lat_std << 0.9, 1.4, 1.0, 0.6;

  Rng drng(33);
  const Matrix past = random_matrix(drng, 64, 2 * cfg.t_past, 0.5);
  const Matrix ctx = flow.context(store, past, norms);

  Rng base_rng(77);
  Matrix z0(64, cfg.data_dim);
  for (Eigen::Index r = 0; r < 64; ++r) {
    for (int c = 0; c < cfg.data_dim; ++c) z0(r, c) = base_rng.normal();
  }

  Rng sample_rng(77);
  const Matrix y = flow.sample(store, ctx, norms, sample_rng);

  Tape tape;
  const auto [vz, vld] = flow.forward(tape, store, tape.constant(y),
                                      tape.constant(ctx), norms);
  CHECK((tape.value(vz) - z0).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("forward log-determinant matches a finite-difference jacobian") {
  FlowConfig cfg = small_config();
  const ConditionalFlow flow(cfg, 41);
  ParamStore store;
  Rng rng(42);
  flow.create_params(store, rng);
  perturb_conditioners(store, rng, 0.8);

  FlowNorms norms;
  norms.ensure_sized(cfg.data_dim);
  norms.lat_std << 1.2, 0.8;

  Rng drng(43);
  const Matrix past = random_matrix(drng, 1, 2 * cfg.t_past, 0.5);
  const Matrix ctx = flow.context(store, past, norms);

  auto forward_row = [&](const Matrix& y) {
    Tape tape;
    const auto [vz, vld] = flow.forward(tape, store, tape.constant(y),
                                        tape.constant(ctx), norms);
    return std::pair<Matrix, double>(tape.value(vz), tape.value(vld)(0, 0));
  };

  const double eps = 1e-6;
  for (double x0 : {-1.7, 0.3, 1.1}) {
    Matrix y(1, 2);
    y << x0, 0.4 * x0 - 0.2;
    const auto [z, logdet] = forward_row(y);

    Matrix jac(2, 2);
    for (int d = 0; d < 2; ++d) {
      Matrix yp = y, ym = y;
      yp(0, d) += eps;
      ym(0, d) -= eps;
      const Matrix zp = forward_row(yp).first;
      const Matrix zm = forward_row(ym).first;
      jac.col(d) = (zp - zm).transpose() / (2.0 * eps);
    }
    const double fd = std::log(std::abs(jac.determinant()));
    CHECK(logdet == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("gradient of the negative log-likelihood passes finite differences") {
  FlowConfig cfg = small_config();
  const ConditionalFlow flow(cfg, 51);
  ParamStore store;
  Rng rng(52);
  flow.create_params(store, rng);
  perturb_conditioners(store, rng, 0.5);

  FlowNorms norms;
  norms.ensure_sized(cfg.data_dim);

  Rng drng(53);
  const Matrix past = random_matrix(drng, 5, 2 * cfg.t_past, 0.5);
  Matrix y = random_matrix(drng, 5, cfg.data_dim, 1.0);
  y(4, 1) = 6.5;  // one value beyond the spline box

  auto run = [&](bool grad) {
    Tape tape;
    const Var vctx =
        flow.context(tape, store, tape.constant(past), norms);
    const Var lp = flow.log_prob(tape, store, tape.constant(y), vctx, norms);
    const Var loss = tape.scale(tape.mean(lp), -1.0);
    if (grad) tape.backward(loss);
    return tape.value(loss)(0, 0);
  };

  store.zero_grad();
  run(true);
  const auto result =
      trajflow::finite_diff_check(store, [&]() { return run(false); });
  CAPTURE(result.worst_param);
  CAPTURE(result.analytic);
  CAPTURE(result.numeric);
  CHECK(result.max_rel_err < 1e-4);
  CHECK(result.checked > 0);
}

TEST_CASE("shape violations are rejected") {
  FlowConfig cfg = small_config();
  const ConditionalFlow flow(cfg, 61);
  ParamStore store;
  Rng rng(62);
  flow.create_params(store, rng);
  FlowNorms norms;
  norms.ensure_sized(cfg.data_dim);

  const Matrix bad_past = Matrix::Zero(3, 2 * cfg.t_past + 2);
  CHECK_THROWS_AS(flow.context(store, bad_past, norms), ShapeError);

  Rng drng(63);
  const Matrix past = random_matrix(drng, 3, 2 * cfg.t_past);
  const Matrix ctx = flow.context(store, past, norms);
  const Matrix bad_y = Matrix::Zero(3, cfg.data_dim + 1);
  CHECK_THROWS_AS(flow.log_prob(store, bad_y, ctx, norms), ShapeError);

  const Matrix y = Matrix::Zero(2, cfg.data_dim);  // row count mismatch
  CHECK_THROWS_AS(flow.log_prob(store, y, ctx, norms), ShapeError);

  const Matrix bad_ctx = Matrix::Zero(3, cfg.context_dim + 1);
  CHECK_THROWS_AS(flow.sample(store, bad_ctx, norms, drng), ShapeError);
}

TEST_CASE("past context rows honor the representation mode") {
  FlowConfig cfg = small_config();

  Rng rng(71);
  std::vector<Situation> data;
  data.push_back(make_situation(rng, cfg.t_past, 2));
  data.push_back(make_situation(rng, cfg.t_past, 2));

  cfg.past_mode = "positions";
  const Matrix pos = past_context_rows(data, cfg);
  REQUIRE(pos.rows() == 2);
  REQUIRE(pos.cols() == 2 * cfg.t_past);
  CHECK(pos(0, 0) == data[0].past.points[0].x);
  CHECK(pos(1, 5) == data[1].past.points[2].y);

  cfg.past_mode = "displacements";
  const Matrix disp = past_context_rows(data, cfg);
  CHECK(disp(0, 0) == 0.0);
  CHECK(disp(0, 1) == 0.0);
  CHECK(disp(0, 2) ==
        doctest::Approx(data[0].past.points[1].x - data[0].past.points[0].x));
  CHECK(disp(1, 5) ==
        doctest::Approx(data[1].past.points[2].y - data[1].past.points[1].y));

  data[1].past.points.pop_back();
  CHECK_THROWS_AS(past_context_rows(data, cfg), ShapeError);
}

TEST_CASE("context norm fitting matches hand-computed moments") {
  Matrix past(2, 4);
  past << 0.0, 0.0, 2.0, 2.0,
          0.0, 0.0, 4.0, 6.0;

  FlowNorms norms;
  trajflow::fit_context_norms(norms, past);
  // x samples {0, 2, 0, 4}: mean 1.5, variance 2.75.
  CHECK(norms.ctx_mean[0] == doctest::Approx(1.5));
  CHECK(norms.ctx_std[0] == doctest::Approx(std::sqrt(2.75)));
  // y samples {0, 2, 0, 6}: mean 2, variance 6.
  CHECK(norms.ctx_mean[1] == doctest::Approx(2.0));
  CHECK(norms.ctx_std[1] == doctest::Approx(std::sqrt(6.0)));

  CHECK_THROWS_AS(trajflow::fit_context_norms(norms, Matrix()), InvalidInput);
}

TEST_CASE("latent norm fitting guards degenerate columns") {
  Matrix enc(2, 2);
  enc << 1.0, 5.0,
         3.0, 5.0;

  FlowNorms norms;
  trajflow::fit_latent_norms(norms, enc);
  CHECK(norms.lat_mean[0] == doctest::Approx(2.0));
  CHECK(norms.lat_std[0] == doctest::Approx(1.0));
  CHECK(norms.lat_mean[1] == doctest::Approx(5.0));
  CHECK(norms.lat_std[1] == 1.0);  // constant column keeps unit scale

  CHECK_THROWS_AS(trajflow::fit_latent_norms(norms, Matrix()), InvalidInput);
}

TEST_CASE("standardization shifts log densities by the expected constant") {
  // With identity couplings the flow with norms (mu, sigma) is exactly the
  // density of N(mu, diag(sigma^2)) evaluated through the change of
  // variables, so log p(mu) = -D/2 log(2 pi) - sum log sigma.
  FlowConfig cfg;
  const ConditionalFlow flow(cfg, 81);
  ParamStore store;
  Rng rng(82);
  flow.create_params(store, rng);

  FlowNorms norms;
  norms.ensure_sized(cfg.data_dim);
  norms.lat_mean << 1.0, -2.0, 0.5, 3.0;
  norms.lat_std << 2.0, 0.5, 1.0, 4.0;

  Rng drng(83);
  const Matrix past = random_matrix(drng, 1, 2 * cfg.t_past, 0.3);
  const Matrix ctx = flow.context(store, past, norms);

  Matrix y(1, 4);
  y << 1.0, -2.0, 0.5, 3.0;  // exactly the mean
  const Eigen::VectorXd lp = flow.log_prob(store, y, ctx, norms);
  const double expected = -0.5 * kLog2Pi * 4 -
                          std::log(2.0) - std::log(0.5) - std::log(1.0) -
                          std::log(4.0);
  CHECK(lp[0] == doctest::Approx(expected).epsilon(1e-12));
}
