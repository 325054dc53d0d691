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

#include "trajflow/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "trajflow/adam.hpp"
#include "trajflow/checkpoint.hpp"
#include "trajflow/dataset_io.hpp"
#include "trajflow/errors.hpp"
#include "trajflow/rng.hpp"
#include "trajflow/synthetic_data.hpp"
#include "trajflow/tape.hpp"

namespace trajflow {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct LogRow {
  std::string phase;
  int epoch = 0;
  double loss = 0.0;
  double wall_s = 0.0;

  Json to_json() const { return Json::array({phase, epoch, loss, wall_s}); }
  static LogRow from_json(const Json& j) {
    return LogRow{j.at(0).get<std::string>(), j.at(1).get<int>(),
                  j.at(2).get<double>(), j.at(3).get<double>()};
  }
};

void write_log_csv(const fs::path& path, const std::vector<LogRow>& rows) {
  std::string out = "phase,epoch,loss,wall_time_s\n";
  char buf[128];
  for (const LogRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%d,%.17g,%.6f\n", r.phase.c_str(),
                  r.epoch, r.loss, r.wall_s);
    out += buf;
  }
  atomic_write_file(path, out);
}

Json rows_to_json(const std::vector<LogRow>& rows) {
  Json arr = Json::array();
  for (const LogRow& r : rows) arr.push_back(r.to_json());
  return arr;
}

std::vector<LogRow> rows_from_json(const Json& arr) {
  std::vector<LogRow> rows;
  for (const auto& j : arr) rows.push_back(LogRow::from_json(j));
  return rows;
}

// Everything one phase needs to stop and restart mid-run. Persisted as a
// checkpoint whose params are the live ones; the best ones ride in extra.
struct PhaseState {
  int epoch = 0;  // epochs completed
  double best_loss = 0.0;
  int best_epoch = -1;
  int epochs_since_best = 0;
  bool done = false;
  ParamStore params;
  ParamStore best_params;
  Json optimizer = Json::object();
  std::vector<LogRow> log;
};

void save_phase_state(const fs::path& path, const std::string& component,
                      const Json& config, const TrainConfig& cfg,
                      const PhaseState& st, const Json& norms_json) {
  Checkpoint ck;
  ck.component = component;
  ck.config = config;
  ck.seed = cfg.seed;
  ck.epoch = st.epoch;
  ck.best_loss = st.best_loss;
  ck.epochs_since_best = st.epochs_since_best;
  ck.params = st.params;
  ck.optimizer = st.optimizer;
  ck.extra = Json{{"best_params", st.best_params.to_json()},
                  {"best_epoch", st.best_epoch},
                  {"done", st.done},
                  {"log", rows_to_json(st.log)},
                  {"train_config_hash", cfg.hash()}};
  if (!norms_json.is_null()) ck.extra["norms"] = norms_json;
  save_checkpoint(path, ck);
}

bool load_phase_state(const fs::path& path, const std::string& component,
                      const TrainConfig& cfg, PhaseState* st) {
  if (!fs::exists(path)) return false;
  const Checkpoint ck = load_checkpoint(path, component);
  if (ck.extra.at("train_config_hash").get<std::string>() != cfg.hash()) {
    throw ConfigError("resume: state file " + path.string() +
                      " was written under a different train config");
  }
  st->epoch = ck.epoch;
  st->best_loss = ck.best_loss;
  st->epochs_since_best = ck.epochs_since_best;
  st->params = ck.params;
  st->optimizer = ck.optimizer;
  st->best_params = ParamStore::from_json(ck.extra.at("best_params"));
  st->best_epoch = ck.extra.at("best_epoch").get<int>();
  st->done = ck.extra.at("done").get<bool>();
  st->log = rows_from_json(ck.extra.at("log"));
  return true;
}

void publish_checkpoint(const fs::path& path, const std::string& component,
                        const Json& config, const TrainConfig& cfg,
                        const PhaseState& st, const Json& norms_json) {
  Checkpoint ck;
  ck.component = component;
  ck.config = config;
  ck.seed = cfg.seed;
  ck.epoch = st.best_epoch;
  ck.best_loss = st.best_loss;
  ck.epochs_since_best = 0;
  ck.params = st.best_params;
  ck.optimizer = Json::object();
  ck.extra = Json{{"train_config_hash", cfg.hash()},
                  {"dataset", cfg.dataset}};
  if (!norms_json.is_null()) ck.extra["norms"] = norms_json;
  save_checkpoint(path, ck);
}

std::vector<Eigen::Index> epoch_batch(const std::vector<int>& perm,
                                      std::size_t start, std::size_t count) {
  std::vector<Eigen::Index> idx;
  idx.reserve(count);
  for (std::size_t i = start; i < start + count; ++i) {
    idx.push_back(static_cast<Eigen::Index>(perm[i]));
  }
  return idx;
}

Matrix gather_rows(const Matrix& m, const std::vector<Eigen::Index>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
  }
  return out;
}

// Tape-based full-dataset NLL, used for end-of-epoch evaluation. Agrees
// with nll_loss far below its 1e-9 bookkeeping tolerance.
double flow_eval_nll(const ConditionalFlow& flow, ParamStore& params,
                     const Matrix& encodings, const Matrix& past_rows,
                     const FlowNorms& norms) {
  Tape tape;
  const Var ctx = flow.context(tape, params, tape.constant(past_rows), norms);
  const Var lp =
      flow.log_prob(tape, params, tape.constant(encodings), ctx, norms);
  return -tape.value(tape.mean(lp))(0, 0);
}

}  // namespace

void TrainConfig::validate() const {
  if (dataset.empty()) throw ConfigError("train: dataset path is empty");
  if (out_dir.empty()) throw ConfigError("train: out_dir is empty");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(grad_clip > 0.0)) throw ConfigError("train: grad_clip must be > 0");
  if (ae_lr <= 0.0 || flow_lr <= 0.0) {
    throw ConfigError("train: learning rates must be > 0");
  }
  if (ae_max_epochs < 1 || flow_max_epochs < 1) {
    throw ConfigError("train: epoch budgets must be >= 1");
  }
  if (ae_patience < 1 || flow_patience < 1) {
    throw ConfigError("train: patience must be >= 1");
  }
  ae.validate();
  flow.validate();
  if (flow.data_dim != ae.enc_size) {
    throw ConfigError("train: flow data_dim must equal autoencoder enc_size");
  }
}

Json TrainConfig::to_json() const {
  return Json{{"dataset", dataset},
              {"out_dir", out_dir},
              {"seed", seed},
              {"ae", ae.to_json()},
              {"flow", flow.to_json()},
              {"batch_size", batch_size},
              {"grad_clip", grad_clip},
              {"ae_lr", ae_lr},
              {"ae_max_epochs", ae_max_epochs},
              {"ae_patience", ae_patience},
              {"flow_lr", flow_lr},
              {"flow_max_epochs", flow_max_epochs},
              {"flow_patience", flow_patience}};
}

TrainConfig TrainConfig::from_json(const Json& doc) {
  TrainConfig cfg;
  cfg.dataset = doc.value("dataset", cfg.dataset);
  cfg.out_dir = doc.value("out_dir", cfg.out_dir);
  cfg.seed = doc.value("seed", cfg.seed);
  if (doc.contains("ae")) cfg.ae = AEConfig::from_json(doc.at("ae"));
  if (doc.contains("flow")) cfg.flow = FlowConfig::from_json(doc.at("flow"));
  cfg.batch_size = doc.value("batch_size", cfg.batch_size);
  cfg.grad_clip = doc.value("grad_clip", cfg.grad_clip);
  cfg.ae_lr = doc.value("ae_lr", cfg.ae_lr);
  cfg.ae_max_epochs = doc.value("ae_max_epochs", cfg.ae_max_epochs);
  cfg.ae_patience = doc.value("ae_patience", cfg.ae_patience);
  cfg.flow_lr = doc.value("flow_lr", cfg.flow_lr);
  cfg.flow_max_epochs = doc.value("flow_max_epochs", cfg.flow_max_epochs);
  cfg.flow_patience = doc.value("flow_patience", cfg.flow_patience);
  cfg.validate();
  return cfg;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  return from_json(Json::parse(read_file(path)));
}

double nll_loss(const ConditionalFlow& flow, const ParamStore& params,
                const Matrix& encodings, const Matrix& ctx,
                const FlowNorms& norms) {
  if (encodings.rows() == 0) throw InvalidInput("nll_loss: empty batch");
  if (!encodings.allFinite() || !ctx.allFinite()) {
    throw NumericalError("nll_loss: non-finite input");
  }
  const double nll =
      -flow.log_prob(params, encodings, ctx, norms).mean();
  if (!std::isfinite(nll)) {
    throw NumericalError("nll_loss: result is not finite");
  }
  return nll;
}

double reconstruction_mse(const RnnAutoencoder& ae, const ParamStore& params,
                          const Matrix& future_rows) {
  if (future_rows.rows() == 0) {
    throw InvalidInput("reconstruction_mse: empty batch");
  }
  const Matrix rec = ae.decode(params, ae.encode(params, future_rows));
  return (rec - future_rows).array().square().mean();
}

TrainResult train_pipeline(const TrainConfig& cfg, bool resume) {
  cfg.validate();
  const fs::path out_dir(cfg.out_dir);
  fs::create_directories(out_dir);

  const fs::path log_path = out_dir / "training_log.csv";
  const fs::path ae_state_path = out_dir / "ae.state.json";
  const fs::path flow_state_path = out_dir / "flow.state.json";
  const fs::path ae_ckpt_path = out_dir / "ae.ckpt.json";
  const fs::path flow_ckpt_path = out_dir / "flow.ckpt.json";

  const Dataset dataset = load_dataset(cfg.dataset);
  if (dataset.situations.empty()) {
    throw InvalidInput("train: dataset has no situations");
  }

  std::string last_ckpt;  // most recent readable checkpoint, for errors
  auto fail = [&](const std::string& what) -> TrainingError {
    return TrainingError(what, last_ckpt);
  };

  TrainResult result;
  result.log_path = log_path;
  std::vector<LogRow> ae_log;

  // ---- Phase 1: autoencoder on balanced data ----
  const RnnAutoencoder ae(cfg.ae);
  PhaseState ae_st;
  {
    const std::vector<Situation> balanced =
        balance_by_mode(dataset.situations);
    const Matrix rows = future_displacement_rows(balanced, cfg.ae.t_pred);
    const Eigen::Index n = rows.rows();

    Adam opt(AdamConfig{cfg.ae_lr, 0.9, 0.999, 1e-8});
    const bool resumed =
        resume && load_phase_state(ae_state_path, "rnn_ae.state", cfg, &ae_st);
    if (resumed) {
      opt.state_from_json(ae_st.optimizer);
      last_ckpt = ae_state_path.string();
    } else {
      ae_st = PhaseState();
      Rng init_rng = Rng::substream(cfg.seed, "init.ae");
      ae.create_params(ae_st.params, init_rng);
    }

    while (!ae_st.done) {
      if (ae_st.epoch >= cfg.ae_max_epochs ||
          (ae_st.best_epoch >= 0 &&
           ae_st.epochs_since_best >= cfg.ae_patience)) {
        ae_st.done = true;
        save_phase_state(ae_state_path, "rnn_ae.state", cfg.ae.to_json(),
                         cfg, ae_st, Json());
        break;
      }
      const auto t0 = Clock::now();
      const int epoch = ae_st.epoch + 1;
      Rng shuffle_rng =
          Rng::substream(cfg.seed, "ae.epoch", std::uint64_t(epoch));
      const std::vector<int> perm =
          shuffle_rng.permutation(static_cast<int>(n));

      for (std::size_t start = 0; start < std::size_t(n);
           start += std::size_t(cfg.batch_size)) {
        const std::size_t count =
            std::min(std::size_t(cfg.batch_size), std::size_t(n) - start);
        const Matrix batch =
            gather_rows(rows, epoch_batch(perm, start, count));
        Tape tape;
        const Var loss =
            ae.reconstruction_loss(tape, ae_st.params, tape.constant(batch));
        ae_st.params.zero_grad();
        tape.backward(loss);
        ae_st.params.clip_grad_norm(cfg.grad_clip);
        if (!opt.step(ae_st.params)) {
          throw fail("ae training diverged (non-finite gradients) at epoch " +
                     std::to_string(epoch));
        }
      }

      const double eval = reconstruction_mse(ae, ae_st.params, rows);
      if (!std::isfinite(eval)) {
        throw fail("ae training diverged (non-finite loss) at epoch " +
                   std::to_string(epoch));
      }
      ae_st.epoch = epoch;
      ae_st.log.push_back(LogRow{"ae", epoch, eval, seconds_since(t0)});
      if (ae_st.best_epoch < 0 || eval < ae_st.best_loss) {
        ae_st.best_loss = eval;
        ae_st.best_epoch = epoch;
        ae_st.epochs_since_best = 0;
        ae_st.best_params = ae_st.params;
      } else {
        ++ae_st.epochs_since_best;
      }
      ae_st.optimizer = opt.state_to_json();
      save_phase_state(ae_state_path, "rnn_ae.state", cfg.ae.to_json(), cfg,
                       ae_st, Json());
      last_ckpt = ae_state_path.string();
      std::vector<LogRow> all = ae_st.log;
      write_log_csv(log_path, all);
    }

    publish_checkpoint(ae_ckpt_path, "rnn_ae", cfg.ae.to_json(), cfg, ae_st,
                       Json());
    last_ckpt = ae_ckpt_path.string();
    ae_log = ae_st.log;
    result.ae.checkpoint = ae_ckpt_path;
    result.ae.best_loss = ae_st.best_loss;
    result.ae.best_epoch = ae_st.best_epoch;
    result.ae.epochs_run = ae_st.epoch;
  }

  // ---- Phase 2: flow on frozen encodings ----
  {
    const ParamStore frozen_ae =
        load_checkpoint(ae_ckpt_path, "rnn_ae").params;
    const Matrix future_rows =
        future_displacement_rows(dataset.situations, cfg.ae.t_pred);
    const Matrix encodings = ae.encode(frozen_ae, future_rows);
    const Matrix past_rows = past_context_rows(dataset.situations, cfg.flow);

    FlowNorms norms;
    norms.ensure_sized(cfg.flow.data_dim);
    fit_context_norms(norms, past_rows);
    fit_latent_norms(norms, encodings);
    const Json norms_json = norms.to_json();

    const ConditionalFlow flow(cfg.flow, cfg.seed);
    const Eigen::Index n = encodings.rows();

    Adam opt(AdamConfig{cfg.flow_lr, 0.9, 0.999, 1e-8});
    PhaseState fl_st;
    const bool resumed =
        resume && load_phase_state(flow_state_path, "flow.state", cfg, &fl_st);
    if (resumed) {
      opt.state_from_json(fl_st.optimizer);
      last_ckpt = flow_state_path.string();
    } else {
      fl_st = PhaseState();
      Rng init_rng = Rng::substream(cfg.seed, "init.flow");
      flow.create_params(fl_st.params, init_rng);
    }

    while (!fl_st.done) {
      if (fl_st.epoch >= cfg.flow_max_epochs ||
          (fl_st.best_epoch >= 0 &&
           fl_st.epochs_since_best >= cfg.flow_patience)) {
        fl_st.done = true;
        save_phase_state(flow_state_path, "flow.state", cfg.flow.to_json(),
                         cfg, fl_st, norms_json);
        break;
      }
      const auto t0 = Clock::now();
      const int epoch = fl_st.epoch + 1;
      Rng shuffle_rng =
          Rng::substream(cfg.seed, "flow.epoch", std::uint64_t(epoch));
      const std::vector<int> perm =
          shuffle_rng.permutation(static_cast<int>(n));

      for (std::size_t start = 0; start < std::size_t(n);
           start += std::size_t(cfg.batch_size)) {
        const std::size_t count =
            std::min(std::size_t(cfg.batch_size), std::size_t(n) - start);
        const auto idx = epoch_batch(perm, start, count);
        const Matrix enc_batch = gather_rows(encodings, idx);
        const Matrix past_batch = gather_rows(past_rows, idx);

        Tape tape;
        const Var ctx = flow.context(tape, fl_st.params,
                                     tape.constant(past_batch), norms);
        const Var lp = flow.log_prob(tape, fl_st.params,
                                     tape.constant(enc_batch), ctx, norms);
        const Var loss = tape.scale(tape.mean(lp), -1.0);
        fl_st.params.zero_grad();
        tape.backward(loss);
        fl_st.params.clip_grad_norm(cfg.grad_clip);
        if (!opt.step(fl_st.params)) {
          throw fail(
              "flow training diverged (non-finite gradients) at epoch " +
              std::to_string(epoch));
        }
      }

      const double eval =
          flow_eval_nll(flow, fl_st.params, encodings, past_rows, norms);
      if (!std::isfinite(eval)) {
        throw fail("flow training diverged (non-finite loss) at epoch " +
                   std::to_string(epoch));
      }
      fl_st.epoch = epoch;
      fl_st.log.push_back(LogRow{"flow", epoch, eval, seconds_since(t0)});
      if (fl_st.best_epoch < 0 || eval < fl_st.best_loss) {
        fl_st.best_loss = eval;
        fl_st.best_epoch = epoch;
        fl_st.epochs_since_best = 0;
        fl_st.best_params = fl_st.params;
      } else {
        ++fl_st.epochs_since_best;
      }
      fl_st.optimizer = opt.state_to_json();
      save_phase_state(flow_state_path, "flow.state", cfg.flow.to_json(),
                       cfg, fl_st, norms_json);
      last_ckpt = flow_state_path.string();
      std::vector<LogRow> all = ae_log;
      all.insert(all.end(), fl_st.log.begin(), fl_st.log.end());
      write_log_csv(log_path, all);
    }

    publish_checkpoint(flow_ckpt_path, "flow", cfg.flow.to_json(), cfg,
                       fl_st, norms_json);
    last_ckpt = flow_ckpt_path.string();
    std::vector<LogRow> all = ae_log;
    all.insert(all.end(), fl_st.log.begin(), fl_st.log.end());
    write_log_csv(log_path, all);

    result.flow.checkpoint = flow_ckpt_path;
    result.flow.best_loss = fl_st.best_loss;
    result.flow.best_epoch = fl_st.best_epoch;
    result.flow.epochs_run = fl_st.epoch;
  }

  return result;
}

}  // namespace trajflow
