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

#ifndef TRAJFLOW_GRAD_CHECK_HPP_
#define TRAJFLOW_GRAD_CHECK_HPP_

#include <cmath>
#include <functional>
#include <string>

#include "trajflow/params.hpp"

namespace trajflow {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_param;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

// Compares the gradients already accumulated in `store` against central
// finite differences of `loss_fn`, which must recompute the same loss from
// the current parameter values. `stride` checks every stride-th entry of
// each parameter (1 checks everything).
inline GradCheckResult finite_diff_check(
    ParamStore& store, const std::function<double()>& loss_fn,
    double eps = 1e-5, int stride = 1) {
  GradCheckResult result;
  for (auto& [name, p] : store) {
    for (Eigen::Index i = 0; i < p.value.size(); i += stride) {
      const double saved = p.value.data()[i];
      p.value.data()[i] = saved + eps;
      const double up = loss_fn();
      p.value.data()[i] = saved - eps;
      const double down = loss_fn();
      p.value.data()[i] = saved;

      const double fd = (up - down) / (2.0 * eps);
      const double an = p.grad.data()[i];
      // The floor keeps central-difference cancellation noise on
      // near-zero gradients from registering as a relative error.
      const double rel =
          std::abs(an - fd) / std::max(std::abs(an) + std::abs(fd), 1e-6);
      ++result.checked;
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst_param = name;
        result.analytic = an;
        result.numeric = fd;
      }
    }
  }
  return result;
}

}  // namespace trajflow

#endif  // TRAJFLOW_GRAD_CHECK_HPP_
