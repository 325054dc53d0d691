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

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "trajflow/checkpoint.hpp"
#include "trajflow/dataset_io.hpp"
#include "trajflow/errors.hpp"
#include "trajflow/flow.hpp"
#include "trajflow/json_util.hpp"
#include "trajflow/rng.hpp"
#include "trajflow/synthetic_data.hpp"
#include "trajflow/training.hpp"

namespace fs = std::filesystem;
using trajflow::AEConfig;
using trajflow::Checkpoint;
using trajflow::ConditionalFlow;
using trajflow::FlowConfig;
using trajflow::FlowNorms;
using trajflow::Json;
using trajflow::Matrix;
using trajflow::ParamStore;
using trajflow::Rng;
using trajflow::RnnAutoencoder;
using trajflow::SceneSpec;
using trajflow::TrainConfig;
using trajflow::TrainResult;

namespace {

Json line_points(int n_past, int n_total, double slope) {
  Json pts = Json::array();
  for (int i = 0; i < n_total; ++i) {
    const double y = i < n_past ? 0.0 : slope * double(i - n_past + 1);
    pts.push_back(Json::array({double(i), y}));
  }
  return pts;
}

SceneSpec tiny_bimodal_spec(int n_samples) {
  Json doc;
  doc["format_version"] = 1;
  doc["family"] = "bimodal";
  doc["scene_id"] = "train_test";
  doc["t_past"] = 3;
  doc["t_pred"] = 5;
  doc["n_samples"] = n_samples;
  doc["seed"] = 99;
  doc["mode_proportions"] = Json::array({0.5, 0.5});
  doc["scaling"] = Json{{"mean", 1.0}, {"stddev", 0.1}};
  doc["modes"] = Json::array({
      Json{{"label", "up"}, {"points", line_points(3, 8, 0.5)}},
      Json{{"label", "down"}, {"points", line_points(3, 8, -0.5)}},
  });
  return trajflow::scene_spec_from_json(doc);
}

fs::path work_dir(const std::string& leaf) {
  const fs::path dir = fs::temp_directory_path() / "trajflow_training" / leaf;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TrainConfig tiny_config(const fs::path& dataset, const fs::path& out_dir) {
  TrainConfig cfg;
  cfg.dataset = dataset.string();
  cfg.out_dir = out_dir.string();
  cfg.seed = 11;
  cfg.ae.t_pred = 5;
  cfg.ae.em_size = 4;
  cfg.ae.enc_size = 4;
  cfg.ae.gru_hidden = 4;
  cfg.ae.gru_layers = 2;
  cfg.flow.data_dim = 4;
  cfg.flow.t_past = 3;
  cfg.flow.context_dim = 8;
  cfg.flow.ctx_gru_layers = 1;
  cfg.flow.n_layers = 2;
  cfg.flow.num_bins = 4;
  cfg.flow.cond_hidden = 8;
  cfg.flow.past_mode = "displacements";
  cfg.batch_size = 16;
  cfg.ae_lr = 3e-3;
  cfg.ae_max_epochs = 8;
  cfg.ae_patience = 8;
  cfg.flow_lr = 3e-3;
  cfg.flow_max_epochs = 8;
  cfg.flow_patience = 8;
  return cfg;
}

struct CsvRow {
  std::string phase;
  int epoch = 0;
  double loss = 0.0;
};

std::vector<CsvRow> parse_log(const fs::path& path) {
  std::istringstream in(trajflow::read_file(path));
  std::string line;
  std::getline(in, line);
  REQUIRE(line == "phase,epoch,loss,wall_time_s");
  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    CsvRow r;
    std::istringstream ls(line);
    std::string field;
    std::getline(ls, r.phase, ',');
    std::getline(ls, field, ',');
    r.epoch = std::stoi(field);
    std::getline(ls, field, ',');
    r.loss = std::stod(field);
    rows.push_back(r);
  }
  return rows;
}

// "phase,epoch,loss" lines with the wall-time column dropped; wall time is
// the one legitimately nondeterministic column.
std::string stripped_log(const fs::path& path) {
  std::istringstream in(trajflow::read_file(path));
  std::string line;
  std::string out;
  while (std::getline(in, line)) {
    const auto cut = line.rfind(',');
    out += line.substr(0, cut);
    out += '\n';
  }
  return out;
}

// One dataset and one fully trained reference run, shared by the test
// cases below.
struct Reference {
  fs::path dataset;
  TrainConfig cfg;
  TrainResult result;
};

const Reference& reference_run() {
  static const Reference ref = [] {
    Reference r;
    const fs::path dir = work_dir("reference");
    r.dataset = dir / "data.ndjson";
    const SceneSpec spec = tiny_bimodal_spec(48);
    trajflow::save_dataset(r.dataset, trajflow::generate_bimodal(spec), spec);
    r.cfg = tiny_config(r.dataset, dir / "run");
    r.result = trajflow::train_pipeline(r.cfg);
    return r;
  }();
  return ref;
}

}  // namespace

TEST_CASE("train config json roundtrip and validation") {
  TrainConfig cfg = tiny_config("data.ndjson", "out");
  const Json j = cfg.to_json();
  const TrainConfig back = TrainConfig::from_json(j);
  CHECK(back.hash() == cfg.hash());
  CHECK(back.seed == cfg.seed);
  CHECK(back.flow_max_epochs == cfg.flow_max_epochs);

  TrainConfig bad = cfg;
  bad.dataset = "";
  CHECK_THROWS_AS(bad.validate(), trajflow::ConfigError);
  bad = cfg;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), trajflow::ConfigError);
  bad = cfg;
  bad.grad_clip = 0.0;
  CHECK_THROWS_AS(bad.validate(), trajflow::ConfigError);
  bad = cfg;
  bad.ae_patience = 0;
  CHECK_THROWS_AS(bad.validate(), trajflow::ConfigError);
  bad = cfg;
  bad.ae.enc_size = 3;
  bad.ae.gru_hidden = 3;
  CHECK_THROWS_AS(bad.validate(), trajflow::ConfigError);
}

TEST_CASE("nll loss of a fresh flow is the standard normal value") {
  FlowConfig fc;
  fc.data_dim = 4;
  fc.t_past = 3;
  fc.context_dim = 8;
  fc.ctx_gru_layers = 1;
  fc.n_layers = 2;
  fc.num_bins = 4;
  fc.cond_hidden = 8;
  const ConditionalFlow flow(fc, 7);
  ParamStore params;
  Rng init = Rng::substream(7, "init.flow");
  flow.create_params(params, init);
  FlowNorms norms;
  norms.ensure_sized(fc.data_dim);

  Rng data_rng(123);
  Matrix past(6, 2 * fc.t_past);
  for (Eigen::Index r = 0; r < past.rows(); ++r) {
    for (Eigen::Index c = 0; c < past.cols(); ++c) past(r, c) = data_rng.normal();
  }
  const Matrix ctx = flow.context(params, past, norms);

  // Zero encodings through an identity-initialized flow land at the base
  // density: -log N(0 | 0, I_4) = 2 log(2 pi).
  const Matrix enc = Matrix::Zero(6, 4);
  const double nll = trajflow::nll_loss(flow, params, enc, ctx, norms);
  CHECK(std::abs(nll - 2.0 * 1.8378770664093454835606594728112) < 1e-12);

  // The loss is exactly the negative mean of the per-row log densities.
  Matrix enc2(6, 4);
  for (Eigen::Index r = 0; r < enc2.rows(); ++r) {
    for (Eigen::Index c = 0; c < enc2.cols(); ++c) enc2(r, c) = data_rng.normal();
  }
  const double nll2 = trajflow::nll_loss(flow, params, enc2, ctx, norms);
  const double direct = -flow.log_prob(params, enc2, ctx, norms).mean();
  CHECK(std::abs(nll2 - direct) < 1e-12);

  const Matrix empty_enc(0, 4);
  const Matrix empty_ctx(0, fc.context_dim);
  CHECK_THROWS_AS(trajflow::nll_loss(flow, params, empty_enc, empty_ctx, norms),
                  trajflow::InvalidInput);

  Matrix nan_enc = enc2;
  nan_enc(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(trajflow::nll_loss(flow, params, nan_enc, ctx, norms),
                  trajflow::NumericalError);
}

TEST_CASE("reconstruction mse matches a manual roundtrip") {
  AEConfig ac;
  ac.t_pred = 5;
  ac.gru_layers = 2;
  const RnnAutoencoder ae(ac);
  ParamStore params;
  Rng init = Rng::substream(3, "init.ae");
  ae.create_params(params, init);

  Rng data_rng(17);
  Matrix rows(7, 2 * ac.t_pred);
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    for (Eigen::Index c = 0; c < rows.cols(); ++c) rows(r, c) = data_rng.normal();
  }
  const Matrix rec = ae.decode(params, ae.encode(params, rows));
  const double manual = (rec - rows).array().square().mean();
  CHECK(std::abs(trajflow::reconstruction_mse(ae, params, rows) - manual) <
        1e-15);

  const Matrix empty(0, 2 * ac.t_pred);
  CHECK_THROWS_AS(trajflow::reconstruction_mse(ae, params, empty),
                  trajflow::InvalidInput);
}

TEST_CASE("pipeline trains both phases and losses improve") {
  const Reference& ref = reference_run();
  CHECK(fs::exists(ref.result.ae.checkpoint));
  CHECK(fs::exists(ref.result.flow.checkpoint));
  CHECK(fs::exists(ref.result.log_path));
  CHECK(ref.result.ae.epochs_run == 8);
  CHECK(ref.result.flow.epochs_run == 8);

  const auto rows = parse_log(ref.result.log_path);
  REQUIRE(rows.size() == 16);
  double first_ae = 0.0, first_flow = 0.0;
  int seen_flow = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i < 8) {
      CHECK(rows[i].phase == "ae");
      CHECK(rows[i].epoch == int(i) + 1);
      if (i == 0) first_ae = rows[i].loss;
    } else {
      CHECK(rows[i].phase == "flow");
      CHECK(rows[i].epoch == int(i) - 7);
      if (i == 8) first_flow = rows[i].loss;
      ++seen_flow;
    }
  }
  CHECK(seen_flow == 8);
  CHECK(ref.result.ae.best_loss < first_ae);
  CHECK(ref.result.flow.best_loss < first_flow);
}

TEST_CASE("published checkpoints agree with the training log") {
  const Reference& ref = reference_run();
  const Checkpoint ack = trajflow::load_checkpoint(ref.result.ae.checkpoint,
                                                   "rnn_ae");
  const Checkpoint fck = trajflow::load_checkpoint(ref.result.flow.checkpoint,
                                                   "flow");
  const auto rows = parse_log(ref.result.log_path);

  auto logged = [&](const std::string& phase, int epoch) {
    for (const auto& r : rows) {
      if (r.phase == phase && r.epoch == epoch) return r.loss;
    }
    FAIL("missing log row");
    return 0.0;
  };
  CHECK(ack.best_loss == logged("ae", ack.epoch));
  CHECK(fck.best_loss == logged("flow", fck.epoch));

  // Recompute both losses from the checkpoints alone.
  const trajflow::Dataset ds = trajflow::load_dataset(ref.cfg.dataset);
  const RnnAutoencoder ae(AEConfig::from_json(ack.config));
  const auto balanced = trajflow::balance_by_mode(ds.situations);
  const Matrix bal_rows =
      trajflow::future_displacement_rows(balanced, ae.config().t_pred);
  CHECK(std::abs(trajflow::reconstruction_mse(ae, ack.params, bal_rows) -
                 ack.best_loss) < 1e-9);

  const FlowConfig fcfg = FlowConfig::from_json(fck.config);
  const ConditionalFlow flow(fcfg, fck.seed);
  const FlowNorms norms = FlowNorms::from_json(fck.extra.at("norms"));
  const Matrix fut =
      trajflow::future_displacement_rows(ds.situations, ae.config().t_pred);
  const Matrix enc = ae.encode(ack.params, fut);
  const Matrix past = trajflow::past_context_rows(ds.situations, fcfg);
  ParamStore fparams = fck.params;
  const Matrix ctx = flow.context(fparams, past, norms);
  const double nll = trajflow::nll_loss(flow, fparams, enc, ctx, norms);
  CHECK(std::abs(nll - fck.best_loss) < 1e-9);

  // Both published files are tagged with the config that produced them.
  CHECK(ack.extra.at("train_config_hash").get<std::string>() ==
        ref.cfg.hash());
  CHECK(fck.extra.at("train_config_hash").get<std::string>() ==
        ref.cfg.hash());
}

TEST_CASE("training is deterministic across runs") {
  const Reference& ref = reference_run();
  TrainConfig cfg = ref.cfg;
  cfg.out_dir = work_dir("repeat").string();
  const TrainResult again = trajflow::train_pipeline(cfg);

  CHECK(stripped_log(again.log_path) == stripped_log(ref.result.log_path));
  const Checkpoint a = trajflow::load_checkpoint(ref.result.flow.checkpoint,
                                                 "flow");
  const Checkpoint b = trajflow::load_checkpoint(again.flow.checkpoint,
                                                 "flow");
  CHECK(a.params.to_json().dump() == b.params.to_json().dump());
  CHECK(a.best_loss == b.best_loss);
  CHECK(a.epoch == b.epoch);
}

TEST_CASE("a killed run resumes to the identical result") {
  const Reference& ref = reference_run();
  TrainConfig cfg = ref.cfg;
  cfg.out_dir = work_dir("interrupted").string();

  std::fflush(nullptr);
  const pid_t pid = fork();
  REQUIRE(pid >= 0);
  if (pid == 0) {
    try {
      trajflow::train_pipeline(cfg);
    } catch (...) {
    }
    _exit(0);
  }
  usleep(250 * 1000);  // let some epochs land, then pull the plug
  kill(pid, SIGKILL);
  int status = 0;
  waitpid(pid, &status, 0);

  const TrainResult resumed = trajflow::train_pipeline(cfg, /*resume=*/true);
  CHECK(stripped_log(resumed.log_path) == stripped_log(ref.result.log_path));
  const Checkpoint a = trajflow::load_checkpoint(ref.result.flow.checkpoint,
                                                 "flow");
  const Checkpoint b = trajflow::load_checkpoint(resumed.flow.checkpoint,
                                                 "flow");
  CHECK(a.params.to_json().dump() == b.params.to_json().dump());

  // Resuming a finished run republishes the same artifacts.
  const std::string ae_before = trajflow::read_file(resumed.ae.checkpoint);
  const TrainResult again = trajflow::train_pipeline(cfg, /*resume=*/true);
  CHECK(trajflow::read_file(again.ae.checkpoint) == ae_before);
  CHECK(stripped_log(again.log_path) == stripped_log(ref.result.log_path));
}

TEST_CASE("resume refuses state written under another config") {
  const Reference& ref = reference_run();
  TrainConfig cfg = ref.cfg;
  cfg.out_dir = work_dir("hash_guard").string();
  trajflow::train_pipeline(cfg);

  TrainConfig other = cfg;
  other.flow_lr = 5e-3;
  CHECK_THROWS_AS(trajflow::train_pipeline(other, /*resume=*/true),
                  trajflow::ConfigError);
}
