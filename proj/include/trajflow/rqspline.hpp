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

#ifndef TRAJFLOW_RQSPLINE_HPP_
#define TRAJFLOW_RQSPLINE_HPP_

#include <Eigen/Dense>
#include <span>

namespace trajflow {

// Monotone rational-quadratic spline on [-tail_bound, tail_bound] with
// identity tails, parameterized by raw (unconstrained) conditioner
// outputs: num_bins widths, num_bins heights, num_bins - 1 interior
// derivatives, 3 * num_bins - 1 values in total.
struct RqsConfig {
  int num_bins = 8;
  double tail_bound = 3.0;
  double min_bin_width = 1e-3;
  double min_bin_height = 1e-3;
  double min_derivative = 1e-3;

  int param_count() const { return 3 * num_bins - 1; }
};

// Decoded knots. xs and ys hold num_bins + 1 positions spanning exactly
// [-tail_bound, tail_bound]; derivs holds num_bins + 1 slopes with both
// boundary entries fixed at 1 so the spline meets its identity tails
// smoothly. Raw derivatives pass through a shifted softplus that maps 0 to
// slope exactly 1, hence all-zero raw parameters decode to the identity.
struct RqsKnots {
  Eigen::VectorXd xs;
  Eigen::VectorXd ys;
  Eigen::VectorXd derivs;
};

// Throws InvalidParams on a wrong-sized or non-finite raw vector or an
// inconsistent config.
RqsKnots decode_rqs_params(std::span<const double> raw, const RqsConfig& cfg);

struct RqsEval {
  double y = 0.0;
  double log_deriv = 0.0;  // log dy/dx at the evaluation point
};

// x outside [-tail_bound, tail_bound] passes through unchanged with zero
// log-derivative.
RqsEval rqs_forward(const RqsKnots& knots, double x);

// Exact inverse of rqs_forward; log_deriv reports log dx/dy.
RqsEval rqs_inverse(const RqsKnots& knots, double y);

// The softplus input shift that makes raw 0 decode to slope 1:
// softplus(raw + shift) + min_derivative == 1 at raw == 0.
double rqs_derivative_shift(double min_derivative);

}  // namespace trajflow

#endif  // TRAJFLOW_RQSPLINE_HPP_
