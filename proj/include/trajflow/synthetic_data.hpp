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

#ifndef TRAJFLOW_SYNTHETIC_DATA_HPP_
#define TRAJFLOW_SYNTHETIC_DATA_HPP_

#include <span>
#include <string>
#include <vector>

#include "trajflow/scene_spec.hpp"
#include "trajflow/trajectory.hpp"

namespace trajflow {

// Bimodal family: one shared past segment (from the first template); each
// future is its template scaled about the current position by a factor
// drawn from the scene's scaling distribution. Deterministic given the
// spec seed.
std::vector<Situation> generate_bimodal(const SceneSpec& spec);

// Branching family: n_samples template copies in largest-remainder
// proportion counts, cut into sliding windows of t_past + t_pred steps as
// the agent moves along its trajectory.
std::vector<Situation> generate_branching(const SceneSpec& spec);

// Per-mode trajectory counts used by generate_branching (largest
// remainder, ties broken by mode order).
std::vector<int> branching_mode_counts(const SceneSpec& spec);

// Fraction of pool trajectories per mode whose first prefix_len points
// coincide with `prefix` within tol: the ground-truth mode probabilities
// from a given current point, by exhaustive continuation counting.
std::vector<double> continuation_probabilities(const SceneSpec& spec,
                                               std::span<const Vec2> prefix,
                                               double tol = 1e-9);

// Oversamples every mode group to the size of the largest one by
// duplicating its members in round-robin order; originals keep their
// positions. `expected_modes`, when nonempty, declares the full label set
// so that an absent mode is reported instead of silently ignored.
std::vector<Situation> balance_by_mode(
    const std::vector<Situation>& data,
    const std::vector<std::string>& expected_modes = {});

}  // namespace trajflow

#endif  // TRAJFLOW_SYNTHETIC_DATA_HPP_
