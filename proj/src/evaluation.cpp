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

#include "trajflow/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <thread>

#include "trajflow/errors.hpp"
#include "trajflow/synthetic_data.hpp"

namespace trajflow {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kRidge = 1e-9;
constexpr double kQFloor = 1e-300;
constexpr double kPrefixTol = 1e-9;

double log_sum_exp(std::span<const double> v) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : v) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

double step_distance(const Vec2& a, const Vec2& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

Eigen::VectorXd flatten_points(std::span<const Vec2> pts) {
  Eigen::VectorXd v(2 * static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    v(2 * static_cast<Eigen::Index>(i)) = pts[i].x;
    v(2 * static_cast<Eigen::Index>(i) + 1) = pts[i].y;
  }
  return v;
}

bool prefix_matches(std::span<const Vec2> path, std::span<const Vec2> prefix) {
  if (path.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::abs(path[i].x - prefix[i].x) > kPrefixTol ||
        std::abs(path[i].y - prefix[i].y) > kPrefixTol) {
      return false;
    }
  }
  return true;
}

std::string hardware_description() {
  std::string name = "unknown-cpu";
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line)) {
    const auto pos = line.find("model name");
    if (pos == std::string::npos) continue;
    const auto colon = line.find(':');
    if (colon != std::string::npos) {
      name = line.substr(colon + 1);
      const auto first = name.find_first_not_of(' ');
      if (first != std::string::npos) name = name.substr(first);
    }
    break;
  }
  return name + ", " + std::to_string(std::thread::hardware_concurrency()) +
         " hardware threads";
}

void check_finite_values(const Json& j, const std::string& where) {
  if (j.is_number_float() && !std::isfinite(j.get<double>())) {
    throw InvalidInput("metric report: non-finite value in " + where);
  }
  if (j.is_object() || j.is_array()) {
    for (const auto& item : j.items()) check_finite_values(item.value(), where);
  }
}

std::string csv_cell(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();  // shortest round-trip form for numbers
}

}  // namespace

double discrete_kl(std::span<const double> log_p, std::span<const double> log_q,
                   bool* clamped) {
  if (log_p.size() != log_q.size() || log_p.empty()) {
    throw InvalidInput("discrete_kl: weight sets must be nonempty and equal");
  }
  const double zp = log_sum_exp(log_p);
  const double zq = log_sum_exp(log_q);
  double kl = 0.0;
  for (std::size_t i = 0; i < log_p.size(); ++i) {
    const double p = std::exp(log_p[i] - zp);
    if (p == 0.0) continue;  // lim p->0 of p log(p/q) is 0
    double log_q_norm = log_q[i] - zq;
    if (std::exp(log_q_norm) == 0.0) {
      log_q_norm = std::log(kQFloor);
      if (clamped != nullptr) *clamped = true;
    }
    kl += p * ((log_p[i] - zp) - log_q_norm);
  }
  return kl;
}

Matrix future_position_rows(std::span<const Situation> data, int t_pred) {
  Matrix rows(static_cast<Eigen::Index>(data.size()), 2 * t_pred);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& pts = data[i].future.points;
    if (static_cast<int>(pts.size()) != t_pred) {
      throw ShapeError("future_position_rows: future has " +
                       std::to_string(pts.size()) + " points, expected " +
                       std::to_string(t_pred));
    }
    rows.row(static_cast<Eigen::Index>(i)) = flatten_points(pts);
  }
  return rows;
}

ModeGaussian::ModeGaussian(Eigen::VectorXd mean, Matrix covariance)
    : mean_(std::move(mean)) {
  covariance_ = 0.5 * (covariance + covariance.transpose());
  ldlt_.compute(covariance_);
  const Eigen::VectorXd d = ldlt_.vectorD();
  if ((d.array() <= 0.0).any()) {
    throw NumericalError("mode gaussian: covariance is not positive definite");
  }
  const double log_det = d.array().log().sum();
  log_norm_ =
      -0.5 * (static_cast<double>(mean_.size()) * kLog2Pi + log_det);
}

double ModeGaussian::log_density(const Eigen::VectorXd& x) const {
  if (x.size() != mean_.size()) {
    throw ShapeError("mode gaussian: point has wrong dimension");
  }
  const Eigen::VectorXd diff = x - mean_;
  return log_norm_ - 0.5 * diff.dot(ldlt_.solve(diff));
}

ModeGaussian fit_mode_gaussian(const Matrix& futures) {
  const Eigen::Index n = futures.rows();
  if (n < 2) {
    throw InvalidInput("fit_mode_gaussian: need at least 2 samples");
  }
  const Eigen::VectorXd mean = futures.colwise().mean();
  const Matrix centered = futures.rowwise() - mean.transpose();
  Matrix cov =
      centered.transpose() * centered / static_cast<double>(n - 1);
  cov.diagonal().array() += kRidge;
  return ModeGaussian(mean, cov);
}

double mixture_log_density(const std::vector<ModeGaussian>& modes,
                           const Eigen::VectorXd& x) {
  if (modes.empty()) throw InvalidInput("mixture: no components");
  std::vector<double> lls;
  lls.reserve(modes.size());
  for (const ModeGaussian& m : modes) lls.push_back(m.log_density(x));
  return log_sum_exp(lls) - std::log(static_cast<double>(modes.size()));
}

KlResult kl_divergence(const TrajFlowModel& model,
                       std::span<const Situation> training,
                       const std::vector<ModeGaussian>& mode_gaussians,
                       int n_samples, Rng& rng) {
  if (training.empty()) throw InvalidInput("kl_divergence: empty training set");
  if (n_samples < 1) throw InvalidInput("kl_divergence: n_samples must be >= 1");
  const int t_pred = model.ae_config().t_pred;
  const Matrix train_rows = future_position_rows(training, t_pred);
  const Eigen::Index n_train = train_rows.rows();

  std::vector<double> true_ll(static_cast<std::size_t>(n_train));
  for (Eigen::Index j = 0; j < n_train; ++j) {
    true_ll[static_cast<std::size_t>(j)] =
        mixture_log_density(mode_gaussians, train_rows.row(j).transpose());
  }

  KlResult out;
  out.n_samples = n_samples;

  // Model draws, each matched to its nearest training future.
  std::vector<double> log_p(static_cast<std::size_t>(n_samples));
  std::vector<double> log_q(static_cast<std::size_t>(n_samples));
  for (int i = 0; i < n_samples; ++i) {
    const Situation& cond =
        training[static_cast<std::size_t>(i) % training.size()];
    const Prediction pred = model.predict_trajectories(cond.past, 1, rng)[0];
    const Eigen::VectorXd row = flatten_points(pred.points);
    Eigen::Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n_train; ++j) {
      const double d = (train_rows.row(j).transpose() - row).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    log_p[static_cast<std::size_t>(i)] = pred.log_likelihood;
    log_q[static_cast<std::size_t>(i)] = true_ll[static_cast<std::size_t>(best)];
  }
  out.kl_on_samples = discrete_kl(log_p, log_q, &out.clamped);

  // Same estimator with both densities evaluated on the training set.
  const Eigen::VectorXd model_ll = model.data_log_prob(training);
  const std::vector<double> log_p_train(model_ll.data(),
                                        model_ll.data() + model_ll.size());
  out.kl_on_training = discrete_kl(log_p_train, true_ll, &out.clamped);
  return out;
}

int nearest_continuation(const std::vector<std::vector<Vec2>>& continuations,
                         std::span<const Vec2> points) {
  if (continuations.empty() || points.empty()) {
    throw InvalidInput("nearest_continuation: nothing to compare");
  }
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < continuations.size(); ++m) {
    const auto& cont = continuations[m];
    const std::size_t k = std::min(cont.size(), points.size());
    if (k == 0) throw InvalidInput("nearest_continuation: empty continuation");
    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      acc += step_distance(cont[i], points[i]);
    }
    const double d = acc / static_cast<double>(k);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(m);
    }
  }
  return best;
}

std::string classify_mode(const Trajectory& traj, const SceneSpec& scene) {
  if (traj.points.empty()) throw InvalidInput("classify_mode: empty trajectory");
  const std::size_t len = traj.points.size();
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < scene.mode_templates.size(); ++m) {
    const auto& pts = scene.mode_templates[m].points;
    if (pts.size() < len) continue;
    // Positions are absolute, so only the true window offset can come
    // close; sliding over offsets recovers it without being told.
    for (std::size_t o = 0; o + len <= pts.size(); ++o) {
      double acc = 0.0;
      for (std::size_t i = 0; i < len; ++i) {
        acc += step_distance(pts[o + i], traj.points[i]);
      }
      const double d = acc / static_cast<double>(len);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(m);
      }
    }
  }
  if (!std::isfinite(best_d)) {
    throw InvalidInput("classify_mode: trajectory longer than every template");
  }
  return scene.mode_templates[static_cast<std::size_t>(best)].label;
}

std::vector<WindowModeErrors> mode_likelihood_error(const TrajFlowModel& model,
                                                    int window,
                                                    const SceneSpec& scene,
                                                    int n_samples, Rng& rng) {
  if (scene.family != SceneFamily::kBranching) {
    throw ConfigError("mode_likelihood_error: needs a branching scene");
  }
  if (n_samples < 1) {
    throw InvalidInput("mode_likelihood_error: n_samples must be >= 1");
  }
  const int horizon = scene.t_past + scene.t_pred;
  if (window < 0 || window + horizon > scene.total_length) {
    throw InvalidInput("mode_likelihood_error: window out of range");
  }
  const std::vector<int> counts = branching_mode_counts(scene);
  const std::size_t n_modes = scene.mode_templates.size();
  const std::size_t prefix_len =
      static_cast<std::size_t>(window + scene.t_past);

  std::vector<WindowModeErrors> out;
  std::vector<bool> used(n_modes, false);
  for (std::size_t lead = 0; lead < n_modes; ++lead) {
    if (used[lead] || counts[lead] == 0) continue;
    const auto& lead_path = scene.mode_templates[lead].points;
    const std::span<const Vec2> prefix(lead_path.data(), prefix_len);

    // Every template sharing this observed prefix is a candidate
    // continuation, including modes generated with zero count.
    WindowModeErrors entry;
    entry.window = window;
    std::vector<std::vector<Vec2>> continuations;
    for (std::size_t m = 0; m < n_modes; ++m) {
      const auto& path = scene.mode_templates[m].points;
      if (!prefix_matches(path, prefix)) continue;
      if (counts[m] > 0) used[m] = true;
      entry.member_modes.push_back(static_cast<int>(m));
      continuations.emplace_back(
          path.begin() + window + scene.t_past,
          path.begin() + window + scene.t_past + scene.t_pred);
    }

    const std::vector<double> gt =
        continuation_probabilities(scene, prefix);

    Trajectory past;
    past.points.assign(prefix.begin() + window, prefix.end());
    past.dt = scene.dt;
    past.agent_id = "query";
    past.scene_id = scene.scene_id;

    const std::vector<Prediction> preds =
        model.predict_trajectories(past, n_samples, rng);
    std::vector<double> lls;
    lls.reserve(preds.size());
    for (const Prediction& p : preds) lls.push_back(p.log_likelihood);
    const double z = log_sum_exp(lls);

    std::vector<double> frac(entry.member_modes.size(), 0.0);
    std::vector<double> mass(entry.member_modes.size(), 0.0);
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const int c = nearest_continuation(continuations, preds[i].points);
      frac[static_cast<std::size_t>(c)] += 1.0 / double(n_samples);
      mass[static_cast<std::size_t>(c)] += std::exp(lls[i] - z);
    }

    for (std::size_t k = 0; k < entry.member_modes.size(); ++k) {
      const std::size_t m = static_cast<std::size_t>(entry.member_modes[k]);
      ModeMassError e;
      e.mode = scene.mode_templates[m].label;
      e.ground_truth = gt[m];
      e.mass_likelihood = mass[k];
      e.mass_fraction = frac[k];
      e.err_likelihood = std::abs(gt[m] - mass[k]);
      e.err_fraction = std::abs(gt[m] - frac[k]);
      entry.modes.push_back(e);
    }
    out.push_back(std::move(entry));
  }
  return out;
}

std::vector<double> top_fraction_mean(const Matrix& step_errors,
                                      double top_frac) {
  const Eigen::Index n = step_errors.rows();
  if (n == 0) throw InvalidInput("top_fraction_mean: no samples");
  if (!(top_frac > 0.0) || top_frac > 1.0) {
    throw InvalidInput("top_fraction_mean: top_frac must be in (0, 1]");
  }
  const Eigen::Index kept = std::max<Eigen::Index>(
      1, static_cast<Eigen::Index>(
             std::ceil(top_frac * static_cast<double>(n))));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const Eigen::VectorXd means = step_errors.rowwise().mean();
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) {
                     return means(a) < means(b);
                   });
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(step_errors.cols());
  for (Eigen::Index i = 0; i < kept; ++i) {
    acc += step_errors.row(order[static_cast<std::size_t>(i)]).transpose();
  }
  acc /= static_cast<double>(kept);
  return {acc.data(), acc.data() + acc.size()};
}

OracleResult oracle_error(const TrajFlowModel& model,
                          std::span<const Situation> situations,
                          int n_samples, double top_frac, Rng& rng) {
  if (situations.empty()) throw InvalidInput("oracle_error: no situations");
  if (n_samples < 1) throw InvalidInput("oracle_error: n_samples must be >= 1");
  const int t_pred = model.ae_config().t_pred;

  OracleResult out;
  out.per_timestep.assign(static_cast<std::size_t>(t_pred), 0.0);
  out.kept_per_situation = static_cast<int>(std::max<Eigen::Index>(
      1, static_cast<Eigen::Index>(
             std::ceil(top_frac * static_cast<double>(n_samples)))));

  for (const Situation& s : situations) {
    if (static_cast<int>(s.future.points.size()) != t_pred) {
      throw ShapeError("oracle_error: future length mismatch");
    }
    const std::vector<Prediction> preds =
        model.predict_trajectories(s.past, n_samples, rng);
    Matrix step_errors(n_samples, t_pred);
    for (int i = 0; i < n_samples; ++i) {
      for (int k = 0; k < t_pred; ++k) {
        step_errors(i, k) =
            step_distance(preds[static_cast<std::size_t>(i)]
                              .points[static_cast<std::size_t>(k)],
                          s.future.points[static_cast<std::size_t>(k)]);
      }
    }
    const std::vector<double> kept = top_fraction_mean(step_errors, top_frac);
    for (int k = 0; k < t_pred; ++k) {
      out.per_timestep[static_cast<std::size_t>(k)] +=
          kept[static_cast<std::size_t>(k)] /
          static_cast<double>(situations.size());
    }
  }
  out.horizon_mean =
      std::accumulate(out.per_timestep.begin(), out.per_timestep.end(), 0.0) /
      static_cast<double>(out.per_timestep.size());
  return out;
}

TimingStats sampling_time_benchmark(const TrajFlowModel& model,
                                    const Trajectory& past, int n,
                                    int repeats, Rng& rng) {
  if (n < 1 || repeats < 1) {
    throw InvalidInput("sampling_time_benchmark: n and repeats must be >= 1");
  }
  using Clock = std::chrono::steady_clock;
  for (int warm = 0; warm < 2; ++warm) {
    (void)model.predict_trajectories(past, n, rng);
  }
  std::vector<double> ms(static_cast<std::size_t>(repeats));
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = Clock::now();
    (void)model.predict_trajectories(past, n, rng);
    ms[static_cast<std::size_t>(r)] =
        std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  }
  std::vector<double> sorted = ms;
  std::sort(sorted.begin(), sorted.end());
  TimingStats out;
  out.n = n;
  out.repeats = repeats;
  out.median_ms = sorted[sorted.size() / 2];
  out.mean_ms =
      std::accumulate(sorted.begin(), sorted.end(), 0.0) / sorted.size();
  const std::size_t p95_idx = static_cast<std::size_t>(std::min<double>(
      static_cast<double>(sorted.size()) - 1.0,
      std::ceil(0.95 * static_cast<double>(sorted.size())) - 1.0));
  out.p95_ms = sorted[p95_idx];
  out.hardware = hardware_description();
  return out;
}

void MetricReport::validate() const {
  if (metric.empty()) throw InvalidInput("metric report: empty metric name");
  if (config_hash.empty()) {
    throw InvalidInput("metric report: empty config hash");
  }
  check_finite_values(values, metric + ".values");
  check_finite_values(breakdown, metric + ".breakdown");
}

Json MetricReport::to_json() const {
  validate();
  return Json{{"metric", metric},
              {"values", values},
              {"sample_count", sample_count},
              {"seed", seed},
              {"config_hash", config_hash},
              {"breakdown", breakdown}};
}

std::string MetricReport::to_csv() const {
  validate();
  std::string out;
  if (breakdown.is_array() && !breakdown.empty()) {
    std::vector<std::string> cols;
    for (const auto& row : breakdown) {
      for (const auto& item : row.items()) {
        if (std::find(cols.begin(), cols.end(), item.key()) == cols.end()) {
          cols.push_back(item.key());
        }
      }
    }
    for (std::size_t i = 0; i < cols.size(); ++i) {
      out += (i == 0 ? "" : ",") + cols[i];
    }
    out += '\n';
    for (const auto& row : breakdown) {
      for (std::size_t i = 0; i < cols.size(); ++i) {
        if (i > 0) out += ',';
        if (row.contains(cols[i])) out += csv_cell(row.at(cols[i]));
      }
      out += '\n';
    }
    return out;
  }
  out = "key,value\n";
  for (const auto& item : values.items()) {
    out += item.key();
    out += ',';
    out += csv_cell(item.value());
    out += '\n';
  }
  return out;
}

}  // namespace trajflow
