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

#ifndef TRAJFLOW_EVALUATION_HPP_
#define TRAJFLOW_EVALUATION_HPP_

#include <Eigen/Cholesky>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "trajflow/json_util.hpp"
#include "trajflow/model.hpp"
#include "trajflow/rng.hpp"
#include "trajflow/scene_spec.hpp"
#include "trajflow/trajectory.hpp"

namespace trajflow {

// N x 2*t_pred rows of flattened absolute future positions
// [x0, y0, x1, y1, ...]; the space every metric below compares in.
Matrix future_position_rows(std::span<const Situation> data, int t_pred);

// A D-dimensional Gaussian fitted to one mode's futures (D = 2*t_pred).
// The covariance carries a fixed ridge so degenerate fits stay usable.
class ModeGaussian {
 public:
  ModeGaussian() = default;
  ModeGaussian(Eigen::VectorXd mean, Matrix covariance);

  const Eigen::VectorXd& mean() const { return mean_; }
  const Matrix& covariance() const { return covariance_; }

  double log_density(const Eigen::VectorXd& x) const;

 private:
  Eigen::VectorXd mean_;
  Matrix covariance_;
  Eigen::LDLT<Matrix> ldlt_;
  double log_norm_ = 0.0;  // -0.5 * (D log 2pi + log det cov)
};

// Sample mean and unbiased sample covariance of the rows, plus a
// 1e-9 * I ridge. Throws InvalidInput on fewer than 2 rows.
ModeGaussian fit_mode_gaussian(const Matrix& futures);

// Equal-weight mixture log density over the fitted modes.
double mixture_log_density(const std::vector<ModeGaussian>& modes,
                           const Eigen::VectorXd& x);

// Self-normalized discrete KL between two equal-length sets of
// unnormalized log weights. Q entries that underflow to zero are clamped
// to 1e-300 and reported through `clamped`.
double discrete_kl(std::span<const double> log_p,
                   std::span<const double> log_q, bool* clamped = nullptr);

struct KlResult {
  double kl_on_samples = 0.0;
  double kl_on_training = 0.0;
  bool clamped = false;  // some matched true likelihood underflowed to 0
  int n_samples = 0;
};

// Discrete KL estimates between the model and the known scene density.
// kl_on_samples: draw n_samples predictions, match each to its nearest
// training future (Euclidean, flattened positions), normalize the model
// likelihoods into P and the matched true mixture likelihoods into Q, and
// return sum P log(P/Q). kl_on_training evaluates both densities on the
// training futures themselves. Zero Q terms are clamped to 1e-300.
KlResult kl_divergence(const TrajFlowModel& model,
                       std::span<const Situation> training,
                       const std::vector<ModeGaussian>& mode_gaussians,
                       int n_samples, Rng& rng);

// Index of the continuation nearest to `points` by mean per-step
// Euclidean distance over min(len) steps; ties pick the lowest index.
int nearest_continuation(const std::vector<std::vector<Vec2>>& continuations,
                         std::span<const Vec2> points);

// Nearest mode template by mean per-step Euclidean distance, minimized
// over every contiguous template segment of the trajectory's length (the
// observed window offset is recovered, not assumed). Ties break toward
// the lower template index.
std::string classify_mode(const Trajectory& traj, const SceneSpec& scene);

struct ModeMassError {
  std::string mode;
  double ground_truth = 0.0;
  double mass_likelihood = 0.0;  // self-normalized likelihood sum (primary)
  double mass_fraction = 0.0;    // empirical fraction of classified samples
  double err_likelihood = 0.0;
  double err_fraction = 0.0;
};

// One conditioning situation: a window offset plus the distinct observed
// prefix shared by `member_modes` there.
struct WindowModeErrors {
  int window = 0;
  std::vector<int> member_modes;  // template indices sharing the prefix
  std::vector<ModeMassError> modes;
};

// Per-mode absolute error between ground-truth continuation probability
// and predicted mode mass at one window of a branching scene. Samples are
// classified against the member modes' continuations; masses use both the
// empirical-fraction and likelihood-sum estimators (each sums to 1).
// Windows whose prefix never occurs in the generated data are skipped.
std::vector<WindowModeErrors> mode_likelihood_error(const TrajFlowModel& model,
                                                    int window,
                                                    const SceneSpec& scene,
                                                    int n_samples, Rng& rng);

struct OracleResult {
  std::vector<double> per_timestep;  // mean error of the kept samples
  double horizon_mean = 0.0;
  int kept_per_situation = 0;
};

// Per-timestep mean over the best ceil(top_frac * rows) rows of a
// samples x timesteps error matrix, ranked by row mean; always keeps at
// least one row.
std::vector<double> top_fraction_mean(const Matrix& step_errors,
                                      double top_frac);

// Best-case accuracy: per situation, draw n_samples predictions, rank by
// mean per-step error to the true future, keep the best
// ceil(top_frac * n_samples) (at least one), and average their per-step
// errors over all situations.
OracleResult oracle_error(const TrajFlowModel& model,
                          std::span<const Situation> situations,
                          int n_samples, double top_frac, Rng& rng);

struct TimingStats {
  double median_ms = 0.0;
  double mean_ms = 0.0;
  double p95_ms = 0.0;
  int n = 0;
  int repeats = 0;
  std::string hardware;
};

// Wall-clock cost of predict_trajectories(past, n) including decoding,
// after warm-up, over `repeats` timed runs.
TimingStats sampling_time_benchmark(const TrajFlowModel& model,
                                    const Trajectory& past, int n,
                                    int repeats, Rng& rng);

// One exported metric: a payload of values plus provenance. `breakdown`
// is an array of flat objects rendered as CSV rows.
struct MetricReport {
  std::string metric;
  Json values = Json::object();
  int sample_count = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
  Json breakdown = Json::array();

  // Throws InvalidInput when a value is non-finite or provenance is empty.
  void validate() const;
  Json to_json() const;
  std::string to_csv() const;
};

}  // namespace trajflow

#endif  // TRAJFLOW_EVALUATION_HPP_
