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

#include "trajflow/rqspline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "trajflow/errors.hpp"

namespace trajflow {

namespace {

double softplus(double x) {
  if (x > 30.0) return x;
  return std::log1p(std::exp(x));
}

void validate_config(const RqsConfig& cfg) {
  if (cfg.num_bins < 1) {
    throw InvalidParams("rqspline: num_bins must be at least 1");
  }
  if (!(cfg.tail_bound > 0.0)) {
    throw InvalidParams("rqspline: tail_bound must be positive");
  }
  if (!(cfg.min_bin_width > 0.0) ||
      cfg.min_bin_width * cfg.num_bins >= 1.0) {
    throw InvalidParams("rqspline: min_bin_width * num_bins must be in (0,1)");
  }
  if (!(cfg.min_bin_height > 0.0) ||
      cfg.min_bin_height * cfg.num_bins >= 1.0) {
    throw InvalidParams(
        "rqspline: min_bin_height * num_bins must be in (0,1)");
  }
  if (!(cfg.min_derivative > 0.0) || cfg.min_derivative >= 1.0) {
    throw InvalidParams("rqspline: min_derivative must be in (0,1)");
  }
}

// Softmax then affine squeeze so every bin keeps at least min_frac of the
// unit mass; positions are the cumulative sums scaled to [-B, B].
Eigen::VectorXd knot_positions(std::span<const double> raw, double min_frac,
                               double bound, int k) {
  Eigen::ArrayXd e(k);
  double max_raw = raw[0];
  for (int i = 1; i < k; ++i) max_raw = std::max(max_raw, raw[std::size_t(i)]);
  for (int i = 0; i < k; ++i) {
    e[i] = std::exp(raw[std::size_t(i)] - max_raw);
  }
  const Eigen::ArrayXd frac =
      min_frac + (1.0 - min_frac * k) * (e / e.sum());

  Eigen::VectorXd pos(k + 1);
  pos[0] = -bound;
  double cum = 0.0;
  for (int i = 0; i < k; ++i) {
    cum += frac[i];
    pos[i + 1] = -bound + 2.0 * bound * cum;
  }
  pos[k] = bound;  // pin the far end against accumulation error
  return pos;
}

// Index of the bin containing v, clamped to a valid bin.
Eigen::Index find_bin(const Eigen::VectorXd& knots, double v) {
  const double* begin = knots.data();
  const double* end = knots.data() + knots.size();
  const auto it = std::upper_bound(begin, end, v);
  Eigen::Index idx = static_cast<Eigen::Index>(it - begin) - 1;
  return std::clamp<Eigen::Index>(idx, 0, knots.size() - 2);
}

}  // namespace

double rqs_derivative_shift(double min_derivative) {
  // softplus(shift) == 1 - min_derivative
  return std::log(std::expm1(1.0 - min_derivative));
}

RqsKnots decode_rqs_params(std::span<const double> raw,
                           const RqsConfig& cfg) {
  validate_config(cfg);
  const int k = cfg.num_bins;
  if (static_cast<int>(raw.size()) != cfg.param_count()) {
    throw InvalidParams("rqspline: expected " +
                        std::to_string(cfg.param_count()) +
                        " raw parameters, got " +
                        std::to_string(raw.size()));
  }
  for (double v : raw) {
    if (!std::isfinite(v)) {
      throw InvalidParams("rqspline: non-finite raw parameter");
    }
  }

  RqsKnots knots;
  knots.xs = knot_positions(raw.subspan(0, std::size_t(k)),
                            cfg.min_bin_width, cfg.tail_bound, k);
  knots.ys = knot_positions(raw.subspan(std::size_t(k), std::size_t(k)),
                            cfg.min_bin_height, cfg.tail_bound, k);

  knots.derivs = Eigen::VectorXd::Ones(k + 1);
  const double shift = rqs_derivative_shift(cfg.min_derivative);
  for (int i = 0; i < k - 1; ++i) {
    knots.derivs[i + 1] =
        cfg.min_derivative + softplus(raw[std::size_t(2 * k + i)] + shift);
  }
  return knots;
}

RqsEval rqs_forward(const RqsKnots& knots, double x) {
  const double lo = knots.xs[0];
  const double hi = knots.xs[knots.xs.size() - 1];
  if (x < lo || x > hi) {
    return {x, 0.0};
  }
  const Eigen::Index b = find_bin(knots.xs, x);
  const double xk = knots.xs[b], xk1 = knots.xs[b + 1];
  const double yk = knots.ys[b], yk1 = knots.ys[b + 1];
  const double dk = knots.derivs[b], dk1 = knots.derivs[b + 1];
  const double w = xk1 - xk;
  const double h = yk1 - yk;
  const double s = h / w;
  const double xi = (x - xk) / w;
  const double omxi = 1.0 - xi;

  const double denom = s + (dk1 + dk - 2.0 * s) * xi * omxi;
  const double numer = h * (s * xi * xi + dk * xi * omxi);
  const double y = yk + numer / denom;

  const double deriv_numer =
      s * s * (dk1 * xi * xi + 2.0 * s * xi * omxi + dk * omxi * omxi);
  return {y, std::log(deriv_numer) - 2.0 * std::log(denom)};
}

RqsEval rqs_inverse(const RqsKnots& knots, double y) {
  const double lo = knots.ys[0];
  const double hi = knots.ys[knots.ys.size() - 1];
  if (y < lo || y > hi) {
    return {y, 0.0};
  }
  const Eigen::Index b = find_bin(knots.ys, y);
  const double xk = knots.xs[b], xk1 = knots.xs[b + 1];
  const double yk = knots.ys[b], yk1 = knots.ys[b + 1];
  const double dk = knots.derivs[b], dk1 = knots.derivs[b + 1];
  const double w = xk1 - xk;
  const double h = yk1 - yk;
  const double s = h / w;
  const double dy = y - yk;
  const double c2 = dk1 + dk - 2.0 * s;

  // Solve a xi^2 + b xi + c = 0 for xi in [0, 1] with the stable root.
  const double qa = h * (s - dk) + dy * c2;
  const double qb = h * dk - dy * c2;
  const double qc = -s * dy;
  const double disc = qb * qb - 4.0 * qa * qc;
  const double root = std::sqrt(std::max(disc, 0.0));
  const double xi = 2.0 * qc / (-qb - root);
  const double xi_cl = std::clamp(xi, 0.0, 1.0);
  const double omxi = 1.0 - xi_cl;

  const double x = xk + w * xi_cl;
  const double denom = s + c2 * xi_cl * omxi;
  const double deriv_numer =
      s * s *
      (dk1 * xi_cl * xi_cl + 2.0 * s * xi_cl * omxi + dk * omxi * omxi);
  return {x, 2.0 * std::log(denom) - std::log(deriv_numer)};
}

}  // namespace trajflow
