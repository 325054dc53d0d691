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

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "trajflow/dataset_io.hpp"
#include "trajflow/errors.hpp"
#include "trajflow/evaluation.hpp"
#include "trajflow/model.hpp"
#include "trajflow/rng.hpp"
#include "trajflow/run_manifest.hpp"
#include "trajflow/scene_spec.hpp"
#include "trajflow/synthetic_data.hpp"
#include "trajflow/training.hpp"

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using trajflow::Json;
using trajflow::MetricReport;
using trajflow::Rng;
using trajflow::RunManifest;
using trajflow::SceneSpec;
using trajflow::Situation;
using trajflow::TrajFlowModel;

namespace {

constexpr int kExitUserError = 2;
constexpr int kExitRuntimeError = 3;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// TRAJFLOW_SEED, when set, overrides every config-provided seed.
std::optional<std::uint64_t> env_seed() {
  const char* raw = std::getenv("TRAJFLOW_SEED");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(raw, &end, 10);
  if (end == raw || *end != '\0') {
    throw trajflow::ConfigError("TRAJFLOW_SEED is not an unsigned integer: " +
                                std::string(raw));
  }
  return static_cast<std::uint64_t>(v);
}

struct GenDataArgs {
  std::string spec_path;
  std::string out_dir;
};

int run_gen_data(const GenDataArgs& args) {
  const auto t0 = Clock::now();
  Json doc = Json::parse(trajflow::read_file(args.spec_path));
  const std::uint64_t config_seed = doc.value("seed", std::uint64_t{0});
  const auto seed_override = env_seed();
  if (seed_override) doc["seed"] = *seed_override;
  const SceneSpec spec = trajflow::scene_spec_from_json(doc);

  const std::vector<Situation> data =
      spec.family == trajflow::SceneFamily::kBimodal
          ? trajflow::generate_bimodal(spec)
          : trajflow::generate_branching(spec);

  fs::create_directories(args.out_dir);
  const fs::path out = fs::path(args.out_dir) / (spec.scene_id + ".ndjson");
  trajflow::save_dataset(out, data, spec);

  RunManifest manifest;
  manifest.command = "gen-data";
  manifest.config = doc;
  manifest.seeds = Json{{"config", config_seed}, {"effective", spec.seed}};
  manifest.input_hashes = Json{{"spec", trajflow::file_hash(args.spec_path)}};
  manifest.output_paths = {out.string()};
  manifest.wall_time_s = seconds_since(t0);
  write_run_manifest(fs::path(args.out_dir) / "run_manifest.json", manifest);

  std::printf("gen-data: wrote %zu situations to %s\n", data.size(),
              out.string().c_str());
  return 0;
}

struct TrainArgs {
  std::string config_path;
  bool resume = false;
};

int run_train(const TrainArgs& args) {
  const auto t0 = Clock::now();
  trajflow::TrainConfig cfg = trajflow::TrainConfig::load(args.config_path);
  const std::uint64_t config_seed = cfg.seed;
  const auto seed_override = env_seed();
  if (seed_override) cfg.seed = *seed_override;
  if (!fs::exists(cfg.dataset)) {
    throw trajflow::ConfigError("train: dataset not found: " + cfg.dataset);
  }

  const trajflow::TrainResult result =
      trajflow::train_pipeline(cfg, args.resume);

  RunManifest manifest;
  manifest.command = "train";
  manifest.config = cfg.to_json();
  manifest.seeds = Json{{"config", config_seed}, {"effective", cfg.seed}};
  manifest.input_hashes =
      Json{{"train_config", trajflow::file_hash(args.config_path)},
           {"dataset", trajflow::file_hash(cfg.dataset)}};
  manifest.output_paths = {result.ae.checkpoint.string(),
                           result.flow.checkpoint.string(),
                           result.log_path.string()};
  manifest.wall_time_s = seconds_since(t0);
  write_run_manifest(fs::path(cfg.out_dir) / "run_manifest.json", manifest);

  std::printf(
      "train: ae best %.6f (epoch %d/%d), flow best %.6f (epoch %d/%d)\n",
      result.ae.best_loss, result.ae.best_epoch, result.ae.epochs_run,
      result.flow.best_loss, result.flow.best_epoch, result.flow.epochs_run);
  return 0;
}

struct EvaluateArgs {
  std::string model_dir;
  std::string data_path;
  std::string metrics = "kl,mle,oracle,time";
  int n_samples = -1;  // -1 keeps each metric's default
  int repeats = 10;
  double top_frac = 0.10;
  std::string out_dir;
};

std::vector<std::string> parse_metric_list(const std::string& csv) {
  static const std::vector<std::string> kValid = {"kl", "mle", "oracle",
                                                  "time"};
  std::vector<std::string> out;
  std::string cur;
  for (char c : csv + ",") {
    if (c != ',') {
      cur += c;
      continue;
    }
    if (cur.empty()) continue;
    if (std::find(kValid.begin(), kValid.end(), cur) == kValid.end()) {
      throw trajflow::ConfigError(
          "evaluate: unknown metric '" + cur +
          "' (valid names: kl, mle, oracle, time)");
    }
    if (std::find(out.begin(), out.end(), cur) == out.end()) {
      out.push_back(cur);
    }
    cur.clear();
  }
  if (out.empty()) {
    throw trajflow::ConfigError(
        "evaluate: no metrics requested (valid names: kl, mle, oracle, time)");
  }
  return out;
}

MetricReport kl_report(const TrajFlowModel& model,
                       const trajflow::Dataset& ds, int n_samples, Rng& rng) {
  const SceneSpec spec = ds.spec();
  std::vector<std::string> order;
  std::map<std::string, std::vector<Situation>> by_mode;
  for (const Situation& s : ds.situations) {
    if (by_mode.find(s.mode_label) == by_mode.end()) {
      order.push_back(s.mode_label);
    }
    by_mode[s.mode_label].push_back(s);
  }
  std::vector<trajflow::ModeGaussian> fits;
  for (const std::string& label : order) {
    fits.push_back(trajflow::fit_mode_gaussian(
        trajflow::future_position_rows(by_mode[label], spec.t_pred)));
  }
  const trajflow::KlResult kl =
      trajflow::kl_divergence(model, ds.situations, fits, n_samples, rng);

  MetricReport rep;
  rep.metric = "kl";
  rep.values = Json{{"kl_on_samples", kl.kl_on_samples},
                    {"kl_on_training", kl.kl_on_training},
                    {"clamped", kl.clamped},
                    {"modes", order.size()}};
  rep.sample_count = kl.n_samples;
  return rep;
}

MetricReport mle_report(const TrajFlowModel& model, const trajflow::Dataset& ds,
                        int n_samples, Rng& rng) {
  const SceneSpec spec = ds.spec();
  const int n_windows = spec.total_length - (spec.t_past + spec.t_pred) + 1;

  struct Agg {
    std::vector<double> err_lik, err_frac;
    double gt_sum = 0.0;
  };
  std::map<std::string, Agg> per_mode;
  std::vector<std::string> order;
  int groups = 0;
  for (int w = 0; w < n_windows; ++w) {
    const auto entries =
        trajflow::mode_likelihood_error(model, w, spec, n_samples, rng);
    groups += static_cast<int>(entries.size());
    for (const auto& entry : entries) {
      for (const auto& e : entry.modes) {
        if (per_mode.find(e.mode) == per_mode.end()) order.push_back(e.mode);
        Agg& agg = per_mode[e.mode];
        agg.err_lik.push_back(e.err_likelihood);
        agg.err_frac.push_back(e.err_fraction);
        agg.gt_sum += e.ground_truth;
      }
    }
  }

  auto stats = [](const std::vector<double>& v) {
    double lo = v[0], hi = v[0], sum = 0.0;
    for (double x : v) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
      sum += x;
    }
    return Json{{"min", lo}, {"avg", sum / double(v.size())}, {"max", hi}};
  };

  MetricReport rep;
  rep.metric = "mle";
  double overall_lik = 0.0, overall_frac = 0.0, worst_lik = 0.0;
  int total = 0;
  for (const std::string& mode : order) {
    const Agg& agg = per_mode[mode];
    const Json lik = stats(agg.err_lik);
    const Json frac = stats(agg.err_frac);
    rep.breakdown.push_back(
        Json{{"mode", mode},
             {"instances", agg.err_lik.size()},
             {"gt_avg", agg.gt_sum / double(agg.err_lik.size())},
             {"err_likelihood_min", lik.at("min")},
             {"err_likelihood_avg", lik.at("avg")},
             {"err_likelihood_max", lik.at("max")},
             {"err_fraction_min", frac.at("min")},
             {"err_fraction_avg", frac.at("avg")},
             {"err_fraction_max", frac.at("max")}});
    for (double x : agg.err_lik) overall_lik += x;
    for (double x : agg.err_frac) overall_frac += x;
    worst_lik = std::max(worst_lik, lik.at("max").get<double>());
    total += static_cast<int>(agg.err_lik.size());
  }
  rep.values = Json{{"windows", n_windows},
                    {"groups", groups},
                    {"avg_err_likelihood", overall_lik / double(total)},
                    {"avg_err_fraction", overall_frac / double(total)},
                    {"max_err_likelihood", worst_lik}};
  rep.sample_count = n_samples;
  return rep;
}

MetricReport oracle_report(const TrajFlowModel& model,
                           const trajflow::Dataset& ds, int n_samples,
                           double top_frac, Rng& rng) {
  const trajflow::OracleResult res =
      trajflow::oracle_error(model, ds.situations, n_samples, top_frac, rng);
  MetricReport rep;
  rep.metric = "oracle";
  rep.values = Json{{"horizon_mean", res.horizon_mean},
                    {"kept_per_situation", res.kept_per_situation},
                    {"top_frac", top_frac}};
  for (std::size_t t = 0; t < res.per_timestep.size(); ++t) {
    rep.breakdown.push_back(
        Json{{"timestep", t + 1}, {"mean_error", res.per_timestep[t]}});
  }
  rep.sample_count = n_samples;
  return rep;
}

MetricReport time_report(const TrajFlowModel& model,
                         const trajflow::Dataset& ds, int repeats, Rng& rng) {
  const trajflow::TimingStats stats = trajflow::sampling_time_benchmark(
      model, ds.situations.front().past, 128, repeats, rng);
  MetricReport rep;
  rep.metric = "time";
  rep.values = Json{{"median_ms", stats.median_ms},
                    {"mean_ms", stats.mean_ms},
                    {"p95_ms", stats.p95_ms},
                    {"predictions_per_run", stats.n},
                    {"repeats", stats.repeats},
                    {"hardware", stats.hardware}};
  rep.sample_count = stats.n;
  return rep;
}

int run_evaluate(const EvaluateArgs& args) {
  const auto t0 = Clock::now();
  const std::vector<std::string> metrics = parse_metric_list(args.metrics);
  const TrajFlowModel model = trajflow::load_model(args.model_dir);
  const trajflow::Dataset ds = trajflow::load_dataset(args.data_path);
  if (ds.situations.empty()) {
    throw trajflow::InvalidInput("evaluate: dataset has no situations");
  }
  const SceneSpec spec = ds.spec();
  if (model.ae_config().t_pred != spec.t_pred) {
    throw trajflow::ConfigError(
        "evaluate: model predicts " +
        std::to_string(model.ae_config().t_pred) +
        " steps but the dataset horizon is " + std::to_string(spec.t_pred));
  }
  if (model.flow_config().t_past != spec.t_past) {
    throw trajflow::ConfigError(
        "evaluate: model conditions on " +
        std::to_string(model.flow_config().t_past) +
        " past steps but the dataset provides " + std::to_string(spec.t_past));
  }

  const auto seed_override = env_seed();
  const std::uint64_t seed = seed_override.value_or(model.seed());
  const fs::path out_dir = args.out_dir.empty()
                               ? fs::path(args.model_dir) / "eval"
                               : fs::path(args.out_dir);
  fs::create_directories(out_dir);

  const std::string config_hash = trajflow::json_hash(
      Json{{"ae", model.ae_config().to_json()},
           {"flow", model.flow_config().to_json()},
           {"spec", spec.hash()}});

  RunManifest manifest;
  manifest.command = "evaluate";
  manifest.config = Json{{"model", args.model_dir},
                         {"data", args.data_path},
                         {"metrics", metrics},
                         {"n_samples", args.n_samples},
                         {"repeats", args.repeats},
                         {"top_frac", args.top_frac}};
  manifest.seeds = Json{{"config", model.seed()}, {"effective", seed}};
  manifest.input_hashes = Json{
      {"dataset", trajflow::file_hash(args.data_path)},
      {"ae_checkpoint",
       trajflow::file_hash(fs::path(args.model_dir) /
                           trajflow::kAeCheckpointName)},
      {"flow_checkpoint",
       trajflow::file_hash(fs::path(args.model_dir) /
                           trajflow::kFlowCheckpointName)}};

  for (const std::string& metric : metrics) {
    Rng rng = Rng::substream(seed, "eval." + metric);
    MetricReport rep;
    if (metric == "kl") {
      rep = kl_report(model, ds, args.n_samples > 0 ? args.n_samples : 100,
                      rng);
    } else if (metric == "mle") {
      rep = mle_report(model, ds, args.n_samples > 0 ? args.n_samples : 100,
                       rng);
    } else if (metric == "oracle") {
      rep = oracle_report(model, ds, args.n_samples > 0 ? args.n_samples : 50,
                          args.top_frac, rng);
    } else {
      rep = time_report(model, ds, args.repeats, rng);
    }
    rep.seed = seed;
    rep.config_hash = config_hash;
    const fs::path json_path = out_dir / (metric + ".json");
    const fs::path csv_path = out_dir / (metric + ".csv");
    trajflow::atomic_write_file(json_path, rep.to_json().dump(2) + "\n");
    trajflow::atomic_write_file(csv_path, rep.to_csv());
    manifest.output_paths.push_back(json_path.string());
    manifest.output_paths.push_back(csv_path.string());
    std::printf("evaluate: %s -> %s\n", metric.c_str(),
                json_path.string().c_str());
  }

  manifest.wall_time_s = seconds_since(t0);
  write_run_manifest(out_dir / "run_manifest.json", manifest);
  return 0;
}

struct SampleArgs {
  std::string model_dir;
  std::string past_path;
  int n = 1;
  std::string out_path;
};

int run_sample(const SampleArgs& args) {
  const auto t0 = Clock::now();
  if (args.n < 1) {
    throw trajflow::ConfigError("sample: -n must be >= 1");
  }
  const TrajFlowModel model = trajflow::load_model(args.model_dir);
  const Json doc = Json::parse(trajflow::read_file(args.past_path));
  if (!doc.contains("points") || !doc.at("points").is_array()) {
    throw trajflow::ConfigError("sample: past file needs a 'points' array");
  }
  trajflow::Trajectory past;
  for (const auto& p : doc.at("points")) {
    past.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  }
  past.dt = doc.value("dt", 1.0);
  past.agent_id = doc.value("agent_id", "query");
  const int t_past = model.flow_config().t_past;
  if (static_cast<int>(past.points.size()) != t_past) {
    throw trajflow::ConfigError(
        "sample: past has " + std::to_string(past.points.size()) +
        " points but the model conditions on " + std::to_string(t_past));
  }

  const auto seed_override = env_seed();
  const std::uint64_t seed = seed_override.value_or(model.seed());
  Rng rng = Rng::substream(seed, "cli.sample");
  std::vector<trajflow::Prediction> preds =
      model.predict_trajectories(past, args.n, rng);
  std::stable_sort(preds.begin(), preds.end(),
                   [](const trajflow::Prediction& a,
                      const trajflow::Prediction& b) {
                     return a.log_likelihood > b.log_likelihood;
                   });

  std::string out;
  for (const auto& pred : preds) {
    Json pts = Json::array();
    for (const auto& p : pred.points) {
      pts.push_back(Json::array({p.x, p.y}));
    }
    out += Json{{"points", pts}, {"log_likelihood", pred.log_likelihood}}
               .dump();
    out += '\n';
  }
  trajflow::atomic_write_file(args.out_path, out);

  RunManifest manifest;
  manifest.command = "sample";
  manifest.config = Json{{"model", args.model_dir},
                         {"past", args.past_path},
                         {"n", args.n}};
  manifest.seeds = Json{{"config", model.seed()}, {"effective", seed}};
  manifest.input_hashes =
      Json{{"past", trajflow::file_hash(args.past_path)},
           {"flow_checkpoint",
            trajflow::file_hash(fs::path(args.model_dir) /
                                trajflow::kFlowCheckpointName)}};
  manifest.output_paths = {args.out_path};
  manifest.wall_time_s = seconds_since(t0);
  write_run_manifest(fs::path(args.out_path).string() + ".manifest.json",
                     manifest);

  std::printf("sample: wrote %d predictions to %s\n", args.n,
              args.out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TrajFlow: conditional-flow trajectory prediction laboratory"};
  app.require_subcommand(1);

  GenDataArgs gen_args;
  CLI::App* gen = app.add_subcommand(
      "gen-data", "Generate a synthetic dataset from a scene spec");
  gen->add_option("--spec", gen_args.spec_path, "Scene spec JSON file")
      ->required();
  gen->add_option("--out", gen_args.out_dir, "Output directory")->required();

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand(
      "train", "Train the autoencoder and flow on a dataset");
  train->add_option("--config", train_args.config_path,
                    "Train config JSON file")
      ->required();
  train->add_flag("--resume", train_args.resume,
                  "Continue from per-phase state files");

  EvaluateArgs eval_args;
  CLI::App* eval = app.add_subcommand(
      "evaluate", "Compute metrics for a trained model on a dataset");
  eval->add_option("--model", eval_args.model_dir,
                   "Directory holding the published checkpoints")
      ->required();
  eval->add_option("--data", eval_args.data_path, "Dataset NDJSON file")
      ->required();
  eval->add_option("--metrics", eval_args.metrics,
                   "Comma-separated list: kl,mle,oracle,time");
  eval->add_option("--n-samples", eval_args.n_samples,
                   "Samples per metric (default: kl/mle 100, oracle 50)");
  eval->add_option("--repeats", eval_args.repeats,
                   "Timed runs for the time metric");
  eval->add_option("--top-frac", eval_args.top_frac,
                   "Kept fraction for the oracle metric");
  eval->add_option("--out", eval_args.out_dir,
                   "Report directory (default: <model>/eval)");

  SampleArgs sample_args;
  CLI::App* sample = app.add_subcommand(
      "sample", "Draw predictions for one observed past");
  sample->add_option("--model", sample_args.model_dir,
                     "Directory holding the published checkpoints")
      ->required();
  sample->add_option("--past", sample_args.past_path,
                     "JSON file with a 'points' array of [x, y] pairs")
      ->required();
  sample->add_option("-n", sample_args.n, "Number of predictions")
      ->required();
  sample->add_option("--out", sample_args.out_path, "Output NDJSON file")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUserError;
  }

  try {
    if (*gen) return run_gen_data(gen_args);
    if (*train) return run_train(train_args);
    if (*eval) return run_evaluate(eval_args);
    if (*sample) return run_sample(sample_args);
    return kExitUserError;
  } catch (const trajflow::TrainingError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    if (!e.last_checkpoint().empty()) {
      std::fprintf(stderr, "last checkpoint: %s\n",
                   e.last_checkpoint().c_str());
    }
    return kExitRuntimeError;
  } catch (const trajflow::NumericalError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntimeError;
  } catch (const trajflow::InvalidParams& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntimeError;
  } catch (const trajflow::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUserError;
  } catch (const trajflow::InvalidInput& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUserError;
  } catch (const trajflow::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUserError;
  } catch (const trajflow::VersionError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUserError;
  } catch (const trajflow::ShapeError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUserError;
  } catch (const Json::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUserError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntimeError;
  }
}
